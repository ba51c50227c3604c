// Command-line entry point: one subcommand per pipeline stage.

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "statiocl/config.hpp"
#include "statiocl/error.hpp"
#include "statiocl/evaluate.hpp"
#include "statiocl/kvfile.hpp"
#include "statiocl/num/checkpoint.hpp"
#include "statiocl/stationarity/adf.hpp"
#include "statiocl/train.hpp"

namespace fs = std::filesystem;
using namespace statiocl;

namespace {

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = "runs";
    std::string manifest;
    std::string checkpoint;
    std::string resume;
};

RunConfig resolve(const Options& o) {
    RunConfig c = o.config.empty() ? default_run_config() : load_run_config(o.config);
    if (o.seed) {
        c.seed = *o.seed;
        c.train.seed = *o.seed;
        c.data.synth.seed = *o.seed;
    }
    if (!o.manifest.empty()) c.data.manifest = o.manifest;
    return c;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw Error("cannot write " + path.string());
}

// <out>/<command>-<hash>-s<seed>, hash over the resolved config and the input paths.
fs::path open_run_dir(const std::string& command, const RunConfig& c, const Options& o) {
    const std::string resolved = to_string(c);
    const std::string key = command + "\n" + resolved + "checkpoint=" + o.checkpoint + "\nresume=" + o.resume + "\n";
    const fs::path dir = fs::path(o.out) / (command + "-" + hash_hex(key).substr(0, 12) + "-s" + std::to_string(c.seed));
    fs::create_directories(dir);
    write_text(dir / "config.ini", resolved);
    std::cerr << "run directory: " << dir.string() << '\n' << "resolved config:\n" << resolved;
    return dir;
}

data::Dataset load_corpus(const RunConfig& c) {
    if (c.data.manifest.empty()) throw ConfigError("no dataset manifest given (use --manifest or [data] manifest)");
    data::LoadOptions options;
    options.normalize = c.data.normalize;
    return data::load_dataset(c.data.manifest, options);
}

encoder::EncoderConfig encoder_for(const RunConfig& c, const data::Dataset& ds) {
    encoder::EncoderConfig e = c.encoder;
    e.in_channels = ds.channels;
    e.input_length = ds.length;
    return e;
}

std::vector<int> states_for(const RunConfig& c, const data::Dataset& ds, const Options& o) {
    return stationarity::assess_dataset_cached(ds, c.contrast.adf_threshold, c.adf_lag, fs::path(o.out) / "cache")
        .states();
}

num::ParameterSet load_encoder(const Options& o, const encoder::EncoderConfig& enc, std::uint64_t seed) {
    if (o.checkpoint.empty()) throw ConfigError("no checkpoint given (use --checkpoint)");
    if (!fs::exists(o.checkpoint)) throw ConfigError("checkpoint not found: " + o.checkpoint);
    num::Checkpoint ck = num::load_checkpoint(o.checkpoint);
    num::require_matching_layout(encoder::encoder_init(enc, seed), ck.params);
    return std::move(ck.params);
}

std::vector<std::vector<std::size_t>> full_schedule(const RunConfig& c, const data::Dataset& ds) {
    const auto pool = ds.indices(data::Split::Train);
    std::vector<std::vector<std::size_t>> out;
    for (std::uint64_t e = 0; e < c.train.epochs; ++e)
        for (auto& b : train::batch_schedule(pool, c.train.batch_size, c.train.seed, e, c.train.shuffle))
            out.push_back(std::move(b));
    return out;
}

int cmd_gen_synth(const Options& o) {
    const RunConfig c = resolve(o);
    const fs::path dir = open_run_dir("gen-synth", c, o);
    const data::Dataset ds = data::gen_synthetic(c.data.synth);
    const fs::path manifest = data::write_dataset(ds, dir / "dataset");
    std::cout << manifest.string() << '\n';
    return 0;
}

int cmd_adf(const Options& o) {
    const RunConfig c = resolve(o);
    const data::Dataset ds = load_corpus(c);
    const fs::path dir = open_run_dir("adf", c, o);
    const auto a = stationarity::assess_dataset_cached(ds, c.contrast.adf_threshold, c.adf_lag, fs::path(o.out) / "cache");
    std::ostringstream report;
    report << "segment,recording,index,label,state";
    for (std::size_t v = 0; v < ds.channels; ++v) report << ",p" << v;
    report << '\n';
    for (std::size_t i = 0; i < ds.segments.size(); ++i) {
        const auto& s = ds.segments[i];
        report << s.id << ',' << s.recording << ',' << s.index << ','
               << (s.label ? std::to_string(*s.label) : std::string("-")) << ',' << a.labels[i].state;
        for (double p : a.labels[i].channel_p_values) report << ',' << (std::isnan(p) ? "nan" : format_double(p));
        report << '\n';
    }
    write_text(dir / "adf_report.csv", report.str());
    std::ostringstream summary;
    auto row = [&](const std::string& name, const stationarity::StateCounts& k) {
        const auto r = k.ratio();
        summary << name << ',' << k.stationary << ',' << k.non_stationary << ','
                << (r ? format_double(*r) : std::string(stationarity::kUndefined)) << '\n';
    };
    summary << "class,stationary,non_stationary,ratio\n";
    row("all", a.overall);
    for (const auto& [label, k] : a.per_class) row(std::to_string(label), k);
    write_text(dir / "adf_summary.csv", summary.str());
    std::cout << summary.str();
    return 0;
}

train::TrainResult run_pretrain(const RunConfig& c, const data::Dataset& ds, const std::vector<int>& states,
                                const fs::path& dir, const std::optional<num::Checkpoint>& resume) {
    train::TrainOptions options;
    options.checkpoint_dir = dir / "checkpoints";
    options.resume = resume;
    std::ofstream log(dir / "train_log.csv", std::ios::binary);
    log << "epoch,L,L_NC,L_TC,wall_time\n";
    options.on_epoch = [&](const train::EpochLog& e) {
        const std::string line = std::to_string(e.epoch) + ',' + format_double(e.loss) + ',' + format_double(e.nc) +
                                 ',' + format_double(e.tc) + ',' + format_double(e.wall_time);
        log << line << '\n';
        log.flush();
        std::cerr << "epoch " << line << '\n';
    };
    return train::pretrain(ds, states, encoder_for(c, ds), c.augment, c.contrast, c.train, options);
}

int cmd_pretrain(const Options& o) {
    const RunConfig c = resolve(o);
    const data::Dataset ds = load_corpus(c);
    std::optional<num::Checkpoint> resume;
    if (!o.resume.empty()) {
        if (!fs::exists(o.resume)) throw ConfigError("checkpoint not found: " + o.resume);
        resume = num::load_checkpoint(o.resume);
    }
    const fs::path dir = open_run_dir("pretrain", c, o);
    const auto states = states_for(c, ds, o);
    run_pretrain(c, ds, states, dir, resume);
    std::cout << train::final_checkpoint_path(dir / "checkpoints").string() << '\n';
    return 0;
}

int cmd_probe(const Options& o) {
    const RunConfig c = resolve(o);
    const data::Dataset ds = load_corpus(c);
    const auto enc = encoder_for(c, ds);
    const auto params = load_encoder(o, enc, c.seed);
    const fs::path dir = open_run_dir("probe", c, o);
    const auto emb = evaluate::embed_dataset(ds, enc, params);
    const auto labels = evaluate::require_labels(ds);
    const auto result = evaluate::linear_probe(emb, labels, ds.split, c.eval.probe, c.seed);
    const std::string text = evaluate::format_probe_result(result);
    write_text(dir / "probe.txt", text);
    std::cout << text;
    return 0;
}

int cmd_fnp_report(const Options& o) {
    const RunConfig c = resolve(o);
    const data::Dataset ds = load_corpus(c);
    const fs::path dir = open_run_dir("fnp-report", c, o);
    const auto states = states_for(c, ds, o);
    const auto schedule = full_schedule(c, ds);
    const std::vector<evaluate::FnpReport> reports{
        evaluate::fnp_audit(ds, states, c.contrast, schedule, evaluate::Policy::Statiocl),
        evaluate::fnp_audit(ds, states, c.contrast, schedule, evaluate::Policy::Random)};
    const std::string text = evaluate::format_fnp_reports(reports);
    write_text(dir / "fnp_report.csv", text);
    std::cout << text;
    return 0;
}

int cmd_label_curve(const Options& o) {
    const RunConfig c = resolve(o);
    const data::Dataset ds = load_corpus(c);
    const auto enc = encoder_for(c, ds);
    const auto params = load_encoder(o, enc, c.seed);
    const fs::path dir = open_run_dir("label-curve", c, o);
    const auto emb = evaluate::embed_dataset(ds, enc, params);
    const auto labels = evaluate::require_labels(ds);
    const auto curve =
        evaluate::label_fraction_protocol(emb, labels, ds.split, c.eval.label_fractions, c.eval.probe, c.seed);
    const std::string text = evaluate::format_fraction_report(curve);
    write_text(dir / "label_curve.csv", text);
    std::cout << text;
    return 0;
}

int cmd_embed(const Options& o) {
    const RunConfig c = resolve(o);
    const data::Dataset ds = load_corpus(c);
    const auto enc = encoder_for(c, ds);
    const auto params = load_encoder(o, enc, c.seed);
    const fs::path dir = open_run_dir("embed", c, o);
    evaluate::embed_export(ds, evaluate::embed_dataset(ds, enc, params), dir / "embeddings.csv");
    std::cout << (dir / "embeddings.csv").string() << '\n';
    return 0;
}

int cmd_grid(const Options& o) {
    const RunConfig base = resolve(o);
    const data::Dataset ds = load_corpus(base);
    const fs::path dir = open_run_dir("grid", base, o);
    const auto labels = evaluate::require_labels(ds);
    std::vector<double> thresholds = base.eval.grid_thresholds;
    if (thresholds.empty()) thresholds.push_back(base.contrast.adf_threshold);

    std::ostringstream table;
    table << "beta,adf_threshold,final_loss,accuracy,macro_f1,hard_fnp_rate,weighted_fnp_mass,run\n";
    for (double threshold : thresholds) {
        RunConfig c = base;
        c.contrast.adf_threshold = threshold;
        const auto states = states_for(c, ds, o);
        for (double beta : base.eval.grid_betas) {
            c.contrast.beta = beta;
            const fs::path sub = dir / ("beta" + format_double(beta) + "-thr" + format_double(threshold));
            fs::create_directories(sub);
            write_text(sub / "config.ini", to_string(c));
            std::cerr << "grid run: beta=" << format_double(beta) << " adf_threshold=" << format_double(threshold)
                      << '\n';
            const auto trained = run_pretrain(c, ds, states, sub, std::nullopt);
            const auto emb = evaluate::embed_dataset(ds, encoder_for(c, ds), trained.params);
            const auto probe = evaluate::linear_probe(emb, labels, ds.split, c.eval.probe, c.seed);
            write_text(sub / "probe.txt", evaluate::format_probe_result(probe));
            const auto fnp = evaluate::fnp_audit(ds, states, c.contrast, full_schedule(c, ds), evaluate::Policy::Statiocl);
            auto show = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string("undefined"); };
            table << format_double(beta) << ',' << format_double(threshold) << ','
                  << format_double(trained.log.back().loss) << ',' << format_double(probe.accuracy) << ','
                  << format_double(probe.macro_f1) << ',' << show(fnp.pooled.hard) << ',' << show(fnp.pooled.weighted)
                  << ',' << sub.filename().string() << '\n';
        }
    }
    write_text(dir / "grid.csv", table.str());
    std::cout << table.str();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stationarity-aware contrastive pretraining for time series"};
    app.require_subcommand(1);
    Options o;

    struct Entry {
        const char* name;
        const char* help;
        int (*run)(const Options&);
        bool manifest, checkpoint, resume;
    };
    const Entry entries[] = {
        {"gen-synth", "Generate a labelled synthetic corpus", cmd_gen_synth, false, false, false},
        {"adf", "Stationarity assessment report for a corpus", cmd_adf, true, false, false},
        {"pretrain", "Self-supervised pretraining", cmd_pretrain, true, false, true},
        {"probe", "Linear probe on frozen embeddings", cmd_probe, true, true, false},
        {"fnp-report", "False-negative-pair audit, StatioCL vs random negatives", cmd_fnp_report, true, false, false},
        {"label-curve", "Probe accuracy across label fractions", cmd_label_curve, true, true, false},
        {"embed", "Export embeddings of every segment", cmd_embed, true, true, false},
        {"grid", "Sweep beta and ADF threshold", cmd_grid, true, false, false},
    };
    int (*selected)(const Options&) = nullptr;
    for (const auto& e : entries) {
        CLI::App* sub = app.add_subcommand(e.name, e.help);
        sub->add_option("--config", o.config, "Run configuration file");
        sub->add_option("--seed", o.seed, "Global seed (overrides the config)");
        sub->add_option("--out", o.out, "Output root directory")->capture_default_str();
        if (e.manifest) sub->add_option("--manifest", o.manifest, "Dataset manifest (overrides [data] manifest)");
        if (e.checkpoint) sub->add_option("--checkpoint", o.checkpoint, "Encoder checkpoint");
        if (e.resume) sub->add_option("--resume", o.resume, "Checkpoint to continue training from");
        sub->callback([&selected, run = e.run] { selected = run; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }
    try {
        return selected(o);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const LoadError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
