#include "statiocl/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "statiocl/error.hpp"
#include "statiocl/kvfile.hpp"

namespace statiocl {

RunConfig default_run_config() {
    RunConfig c;
    c.data.synth.classes = {data::parse_process("ar1(0.5,1)"), data::parse_process("random_walk(1)")};
    return c;
}

namespace {

std::vector<double> parse_doubles(const std::string& value, const std::string& what) {
    std::vector<double> out;
    if (trim(value).empty()) return out;
    for (const auto& item : split_list(value)) out.push_back(parse_double(item, what));
    return out;
}

std::array<std::size_t, encoder::kConvLayers> parse_layers(const std::string& value, const std::string& what) {
    const auto items = split_list(value);
    if (items.size() != encoder::kConvLayers) {
        throw ConfigError(what + " needs " + std::to_string(encoder::kConvLayers) + " comma-separated values, got '" +
                          value + "'");
    }
    std::array<std::size_t, encoder::kConvLayers> out{};
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = parse_size(items[i], what);
    return out;
}

std::string join(const auto& values, const char* sep = ",") {
    std::ostringstream out;
    bool first = true;
    for (const auto& v : values) {
        if (!first) out << sep;
        first = false;
        if constexpr (std::is_floating_point_v<std::decay_t<decltype(v)>>) {
            out << format_double(v);
        } else {
            out << v;
        }
    }
    return out.str();
}

std::string show(bool b) { return b ? "true" : "false"; }

using Setter = std::function<void(RunConfig&, const std::string&)>;

// section -> key -> setter
const std::map<std::string, std::map<std::string, Setter>>& setters() {
    static const std::map<std::string, std::map<std::string, Setter>> table = {
        {"",
         {{"seed", [](RunConfig& c, const std::string& v) { c.seed = static_cast<std::uint64_t>(parse_size(v, "seed")); }}}},
        {"data",
         {{"manifest", [](RunConfig& c, const std::string& v) { c.data.manifest = v; }},
          {"normalize", [](RunConfig& c, const std::string& v) { c.data.normalize = parse_bool(v, "data.normalize"); }},
          {"name", [](RunConfig& c, const std::string& v) { c.data.synth.name = v; }},
          {"classes",
           [](RunConfig& c, const std::string& v) {
               c.data.synth.classes.clear();
               for (const auto& item : split_list(v, ';'))
                   if (!item.empty()) c.data.synth.classes.push_back(data::parse_process(item));
           }},
          {"segments", [](RunConfig& c, const std::string& v) { c.data.synth.segments = parse_size(v, "data.segments"); }},
          {"length", [](RunConfig& c, const std::string& v) { c.data.synth.length = parse_size(v, "data.length"); }},
          {"channels", [](RunConfig& c, const std::string& v) { c.data.synth.channels = parse_size(v, "data.channels"); }},
          {"segments_per_recording",
           [](RunConfig& c, const std::string& v) {
               c.data.synth.segments_per_recording = parse_size(v, "data.segments_per_recording");
           }},
          {"mean_run_length",
           [](RunConfig& c, const std::string& v) { c.data.synth.mean_run_length = parse_double(v, "data.mean_run_length"); }},
          {"split",
           [](RunConfig& c, const std::string& v) {
               const auto p = parse_doubles(v, "data.split");
               if (p.size() != 3) throw ConfigError("data.split needs 3 proportions (train,validation,test)");
               c.data.synth.split = {p[0], p[1], p[2]};
           }},
          {"stratify", [](RunConfig& c, const std::string& v) { c.data.synth.stratify = parse_bool(v, "data.stratify"); }}}},
        {"augment",
         {{"jitter_sigma_weak",
           [](RunConfig& c, const std::string& v) { c.augment.jitter_sigma_weak = parse_double(v, "augment.jitter_sigma_weak"); }},
          {"jitter_sigma_strong",
           [](RunConfig& c, const std::string& v) {
               c.augment.jitter_sigma_strong = parse_double(v, "augment.jitter_sigma_strong");
           }},
          {"scale_sigma", [](RunConfig& c, const std::string& v) { c.augment.scale_sigma = parse_double(v, "augment.scale_sigma"); }},
          {"max_segments",
           [](RunConfig& c, const std::string& v) { c.augment.max_segments = parse_size(v, "augment.max_segments"); }}}},
        {"encoder",
         {{"widths", [](RunConfig& c, const std::string& v) { c.encoder.widths = parse_layers(v, "encoder.widths"); }},
          {"kernels", [](RunConfig& c, const std::string& v) { c.encoder.kernels = parse_layers(v, "encoder.kernels"); }},
          {"pools", [](RunConfig& c, const std::string& v) { c.encoder.pools = parse_layers(v, "encoder.pools"); }},
          {"padding", [](RunConfig& c, const std::string& v) { c.encoder.padding = parse_size(v, "encoder.padding"); }},
          {"output_dim",
           [](RunConfig& c, const std::string& v) { c.encoder.output_dim = parse_size(v, "encoder.output_dim"); }}}},
        {"contrast",
         {{"tau", [](RunConfig& c, const std::string& v) { c.contrast.tau = parse_double(v, "contrast.tau"); }},
          {"lambda", [](RunConfig& c, const std::string& v) { c.contrast.lambda = parse_double(v, "contrast.lambda"); }},
          {"alpha", [](RunConfig& c, const std::string& v) { c.contrast.alpha = parse_double(v, "contrast.alpha"); }},
          {"beta", [](RunConfig& c, const std::string& v) { c.contrast.beta = parse_double(v, "contrast.beta"); }},
          {"horizon", [](RunConfig& c, const std::string& v) { c.contrast.horizon = parse_size(v, "contrast.horizon"); }},
          {"include_positive_in_denominator",
           [](RunConfig& c, const std::string& v) {
               c.contrast.include_positive_in_denominator = parse_bool(v, "contrast.include_positive_in_denominator");
           }},
          {"literal_equation_mode",
           [](RunConfig& c, const std::string& v) {
               c.contrast.literal_equation_mode = parse_bool(v, "contrast.literal_equation_mode");
           }},
          {"adf_threshold",
           [](RunConfig& c, const std::string& v) { c.contrast.adf_threshold = parse_double(v, "contrast.adf_threshold"); }},
          {"adf_lag", [](RunConfig& c, const std::string& v) { c.adf_lag = stationarity::LagPolicy::parse(v); }}}},
        {"train",
         {{"batch_size", [](RunConfig& c, const std::string& v) { c.train.batch_size = parse_size(v, "train.batch_size"); }},
          {"epochs", [](RunConfig& c, const std::string& v) { c.train.epochs = parse_size(v, "train.epochs"); }},
          {"lr", [](RunConfig& c, const std::string& v) { c.train.adam.lr = parse_double(v, "train.lr"); }},
          {"weight_decay",
           [](RunConfig& c, const std::string& v) { c.train.adam.weight_decay = parse_double(v, "train.weight_decay"); }},
          {"beta1", [](RunConfig& c, const std::string& v) { c.train.adam.beta1 = parse_double(v, "train.beta1"); }},
          {"beta2", [](RunConfig& c, const std::string& v) { c.train.adam.beta2 = parse_double(v, "train.beta2"); }},
          {"eps", [](RunConfig& c, const std::string& v) { c.train.adam.eps = parse_double(v, "train.eps"); }},
          {"checkpoint_every",
           [](RunConfig& c, const std::string& v) { c.train.checkpoint_every = parse_size(v, "train.checkpoint_every"); }},
          {"shuffle", [](RunConfig& c, const std::string& v) { c.train.shuffle = parse_bool(v, "train.shuffle"); }},
          {"objective", [](RunConfig& c, const std::string& v) { c.train.objective = train::parse_objective(v); }}}},
        {"eval",
         {{"probe_lr", [](RunConfig& c, const std::string& v) { c.eval.probe.lr = parse_double(v, "eval.probe_lr"); }},
          {"probe_epochs",
           [](RunConfig& c, const std::string& v) { c.eval.probe.epochs = parse_size(v, "eval.probe_epochs"); }},
          {"probe_weight_decay",
           [](RunConfig& c, const std::string& v) {
               c.eval.probe.weight_decay = parse_double(v, "eval.probe_weight_decay");
           }},
          {"probe_batch_size",
           [](RunConfig& c, const std::string& v) { c.eval.probe.batch_size = parse_size(v, "eval.probe_batch_size"); }},
          {"label_fractions",
           [](RunConfig& c, const std::string& v) { c.eval.label_fractions = parse_doubles(v, "eval.label_fractions"); }},
          {"grid_betas", [](RunConfig& c, const std::string& v) { c.eval.grid_betas = parse_doubles(v, "eval.grid_betas"); }},
          {"grid_thresholds",
           [](RunConfig& c, const std::string& v) { c.eval.grid_thresholds = parse_doubles(v, "eval.grid_thresholds"); }}}},
    };
    return table;
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const std::string& source) {
    const KvFile file = parse_kv(text, source);
    RunConfig config = default_run_config();
    for (const auto& section : file.sections) {
        const auto known = setters().find(section.name);
        if (known == setters().end()) {
            throw ConfigError(source + ":" + std::to_string(section.line) + ": unknown section [" + section.name + "]");
        }
        for (const auto& entry : section.entries) {
            const auto setter = known->second.find(entry.key);
            const std::string where = source + ":" + std::to_string(entry.line) + ": ";
            if (setter == known->second.end()) {
                throw ConfigError(where + "unknown key '" + entry.key + "'" +
                                  (section.name.empty() ? std::string() : " in [" + section.name + "]"));
            }
            try {
                setter->second(config, entry.value);
            } catch (const ConfigError& e) {
                throw ConfigError(where + e.what());
            }
        }
    }
    config.train.seed = config.seed;
    config.data.synth.seed = config.seed;
    validate(config);
    return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_run_config(text.str(), path.string());
}

void validate(const RunConfig& c) {
    if (c.data.synth.classes.empty()) throw ConfigError("data.classes must name at least one process");
    if (!(c.data.synth.mean_run_length >= 1.0)) throw ConfigError("data.mean_run_length must be at least 1");
    if (c.data.synth.segments == 0 || c.data.synth.length == 0 || c.data.synth.channels == 0 ||
        c.data.synth.segments_per_recording == 0) {
        throw ConfigError("data.segments, length, channels and segments_per_recording must be positive");
    }
    augment::validate(c.augment);
    contrast::validate(c.contrast);
    train::validate(c.train);
    evaluate::validate(c.eval.probe);
    encoder::validate(c.encoder);
    for (double f : c.eval.label_fractions)
        if (!(f > 0.0 && f <= 1.0)) throw ConfigError("eval.label_fractions entries must lie in (0, 1]");
    for (double b : c.eval.grid_betas)
        if (!(b > 1.0)) throw ConfigError("eval.grid_betas entries must exceed 1");
    for (double t : c.eval.grid_thresholds)
        if (!(t > 0.0 && t < 1.0)) throw ConfigError("eval.grid_thresholds entries must lie in (0, 1)");
}

std::string to_string(const RunConfig& c) {
    std::ostringstream o;
    o << "seed = " << c.seed << "\n\n[data]\n"
      << "manifest = " << c.data.manifest << '\n'
      << "normalize = " << show(c.data.normalize) << '\n'
      << "name = " << c.data.synth.name << '\n';
    std::vector<std::string> classes;
    for (const auto& p : c.data.synth.classes) classes.push_back(p.to_string());
    o << "classes = " << join(classes, "; ") << '\n'
      << "segments = " << c.data.synth.segments << '\n'
      << "length = " << c.data.synth.length << '\n'
      << "channels = " << c.data.synth.channels << '\n'
      << "segments_per_recording = " << c.data.synth.segments_per_recording << '\n'
      << "mean_run_length = " << format_double(c.data.synth.mean_run_length) << '\n'
      << "split = " << join(c.data.synth.split) << '\n'
      << "stratify = " << show(c.data.synth.stratify) << "\n\n[augment]\n"
      << "jitter_sigma_weak = " << format_double(c.augment.jitter_sigma_weak) << '\n'
      << "jitter_sigma_strong = " << format_double(c.augment.jitter_sigma_strong) << '\n'
      << "scale_sigma = " << format_double(c.augment.scale_sigma) << '\n'
      << "max_segments = " << c.augment.max_segments << "\n\n[encoder]\n"
      << "widths = " << join(c.encoder.widths) << '\n'
      << "kernels = " << join(c.encoder.kernels) << '\n'
      << "pools = " << join(c.encoder.pools) << '\n'
      << "padding = " << c.encoder.padding << '\n'
      << "output_dim = " << c.encoder.output_dim << "\n\n[contrast]\n"
      << "tau = " << format_double(c.contrast.tau) << '\n'
      << "lambda = " << format_double(c.contrast.lambda) << '\n'
      << "alpha = " << format_double(c.contrast.alpha) << '\n'
      << "beta = " << format_double(c.contrast.beta) << '\n'
      << "horizon = " << c.contrast.horizon << '\n'
      << "include_positive_in_denominator = " << show(c.contrast.include_positive_in_denominator) << '\n'
      << "literal_equation_mode = " << show(c.contrast.literal_equation_mode) << '\n'
      << "adf_threshold = " << format_double(c.contrast.adf_threshold) << '\n'
      << "adf_lag = " << c.adf_lag.to_string() << "\n\n[train]\n"
      << "batch_size = " << c.train.batch_size << '\n'
      << "epochs = " << c.train.epochs << '\n'
      << "lr = " << format_double(c.train.adam.lr) << '\n'
      << "weight_decay = " << format_double(c.train.adam.weight_decay) << '\n'
      << "beta1 = " << format_double(c.train.adam.beta1) << '\n'
      << "beta2 = " << format_double(c.train.adam.beta2) << '\n'
      << "eps = " << format_double(c.train.adam.eps) << '\n'
      << "checkpoint_every = " << c.train.checkpoint_every << '\n'
      << "shuffle = " << show(c.train.shuffle) << '\n'
      << "objective = " << train::objective_name(c.train.objective) << "\n\n[eval]\n"
      << "probe_lr = " << format_double(c.eval.probe.lr) << '\n'
      << "probe_epochs = " << c.eval.probe.epochs << '\n'
      << "probe_weight_decay = " << format_double(c.eval.probe.weight_decay) << '\n'
      << "probe_batch_size = " << c.eval.probe.batch_size << '\n'
      << "label_fractions = " << join(c.eval.label_fractions) << '\n'
      << "grid_betas = " << join(c.eval.grid_betas) << '\n'
      << "grid_thresholds = " << join(c.eval.grid_thresholds) << '\n';
    return o.str();
}

std::string hash_hex(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream o;
    o << std::hex;
    o.width(16);
    o.fill('0');
    o << h;
    return o.str();
}

}  // namespace statiocl
