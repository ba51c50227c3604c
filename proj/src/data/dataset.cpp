#include "statiocl/data/dataset.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "statiocl/error.hpp"
#include "statiocl/kvfile.hpp"
#include "statiocl/rng.hpp"

namespace statiocl::data {

const char* split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Validation: return "validation";
        case Split::Test: return "test";
    }
    return "?";
}

std::vector<std::size_t> Dataset::indices(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < split.size(); ++i)
        if (split[i] == s) out.push_back(i);
    return out;
}

bool Dataset::has_labels() const {
    return !segments.empty() &&
           std::all_of(segments.begin(), segments.end(), [](const Segment& s) { return s.label.has_value(); });
}

std::size_t Dataset::uniform_recording_size() const {
    if (recordings.empty()) return 0;
    const std::size_t n = recordings.front().count;
    for (const auto& r : recordings)
        if (r.count != n) return 0;
    return n;
}

void validate(const Dataset& ds) {
    if (ds.length == 0 || ds.channels == 0) {
        throw ConfigError("dataset '" + ds.name + "': segment_length and channels must be positive");
    }
    if (ds.segments.empty()) {
        throw ConfigError("dataset '" + ds.name + "' has no segments");
    }
    for (std::size_t i = 0; i < ds.segments.size(); ++i) {
        const Segment& s = ds.segments[i];
        if (s.id != i) {
            throw ConfigError("segment at position " + std::to_string(i) + " has id " + std::to_string(s.id));
        }
        if (s.values.size() != ds.length * ds.channels) {
            throw ConfigError("segment " + std::to_string(i) + " has " + std::to_string(s.values.size()) +
                              " values, expected " + std::to_string(ds.length * ds.channels));
        }
    }
    std::size_t next = 0;
    for (std::size_t r = 0; r < ds.recordings.size(); ++r) {
        const Recording& rec = ds.recordings[r];
        if (rec.id != r || rec.first != next || rec.count == 0) {
            throw ConfigError("recording " + std::to_string(rec.id) +
                              " does not continue the segment tiling at " + std::to_string(next));
        }
        for (std::size_t k = 0; k < rec.count; ++k) {
            const Segment& s = ds.segments.at(rec.first + k);
            if (s.recording != rec.id || s.index != k) {
                throw ConfigError("segment " + std::to_string(s.id) + " disagrees with recording " +
                                  std::to_string(rec.id) + " layout");
            }
        }
        next += rec.count;
    }
    if (next != ds.segments.size()) {
        throw ConfigError("recordings cover " + std::to_string(next) + " of " +
                          std::to_string(ds.segments.size()) + " segments");
    }
    if (ds.split.size() != ds.segments.size()) {
        throw ConfigError("split assignment covers " + std::to_string(ds.split.size()) + " of " +
                          std::to_string(ds.segments.size()) + " segments");
    }
    for (const Recording& rec : ds.recordings) {
        for (std::size_t k = 1; k < rec.count; ++k) {
            if (ds.split[rec.first + k] != ds.split[rec.first]) {
                throw ConfigError("recording " + std::to_string(rec.id) + " straddles splits");
            }
        }
    }
}

Normalization compute_normalization(const Dataset& ds) {
    const std::size_t v_count = ds.channels;
    std::vector<double> sum(v_count, 0.0), sq(v_count, 0.0);
    std::size_t n = 0;
    for (std::size_t i : ds.indices(Split::Train)) {
        const auto& vals = ds.segments[i].values;
        for (std::size_t t = 0; t < ds.length; ++t)
            for (std::size_t v = 0; v < v_count; ++v) sum[v] += vals[t * v_count + v];
        n += ds.length;
    }
    if (n == 0) {
        throw ConfigError("dataset '" + ds.name + "': training split is empty");
    }
    Normalization stats;
    stats.mean.resize(v_count);
    stats.stddev.resize(v_count);
    for (std::size_t v = 0; v < v_count; ++v) stats.mean[v] = sum[v] / static_cast<double>(n);
    for (std::size_t i : ds.indices(Split::Train)) {
        const auto& vals = ds.segments[i].values;
        for (std::size_t t = 0; t < ds.length; ++t)
            for (std::size_t v = 0; v < v_count; ++v) {
                const double d = vals[t * v_count + v] - stats.mean[v];
                sq[v] += d * d;
            }
    }
    for (std::size_t v = 0; v < v_count; ++v) stats.stddev[v] = std::sqrt(sq[v] / static_cast<double>(n));
    return stats;
}

void apply_normalization(Dataset& ds, const Normalization& stats) {
    if (stats.mean.size() != ds.channels || stats.stddev.size() != ds.channels) {
        throw ConfigError("normalization statistics do not match channel count " + std::to_string(ds.channels));
    }
    for (Segment& s : ds.segments)
        for (std::size_t t = 0; t < ds.length; ++t)
            for (std::size_t v = 0; v < ds.channels; ++v) {
                const double sd = stats.stddev[v] > 0.0 ? stats.stddev[v] : 1.0;
                double& x = s.values[t * ds.channels + v];
                x = (x - stats.mean[v]) / sd;
            }
    ds.normalization = stats;
    ds.normalized = true;
}

std::uint64_t dataset_hash(const Dataset& ds) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::uint64_t word) {
        for (int i = 0; i < 8; ++i) {
            h ^= (word >> (8 * i)) & 0xFF;
            h *= 0x100000001b3ULL;
        }
    };
    mix(ds.length);
    mix(ds.channels);
    mix(ds.segments.size());
    for (const Segment& s : ds.segments) {
        mix(s.recording);
        mix(s.index);
        for (double v : s.values) mix(std::bit_cast<std::uint64_t>(v));
    }
    return h;
}

void assign_splits(Dataset& ds, const std::array<double, 3>& proportions, std::uint64_t seed, bool stratify) {
    double total = 0.0;
    std::size_t active = 0;
    for (double p : proportions) {
        if (p < 0.0) throw ConfigError("split proportions must be non-negative");
        total += p;
        if (p > 0.0) ++active;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw ConfigError("split proportions must sum to 1, got " + format_double(total));
    }
    const std::size_t rec_count = ds.recordings.size();
    if (rec_count < active) {
        throw ConfigError("dataset '" + ds.name + "' has " + std::to_string(rec_count) +
                          " recordings, fewer than the " + std::to_string(active) + " requested splits");
    }

    std::array<std::size_t, 3> target{};
    target[0] = static_cast<std::size_t>(std::llround(proportions[0] * static_cast<double>(rec_count)));
    target[1] = static_cast<std::size_t>(std::llround(proportions[1] * static_cast<double>(rec_count)));
    target[0] = std::min(target[0], rec_count);
    target[1] = std::min(target[1], rec_count - target[0]);
    target[2] = rec_count - target[0] - target[1];

    Rng rng = make_rng(seed, {stream::kSplit});
    std::vector<Split> rec_split(rec_count, Split::Train);

    auto majority_label = [&ds](const Recording& rec) -> int {
        std::map<int, std::size_t> counts;
        for (std::size_t k = 0; k < rec.count; ++k) {
            const auto& label = ds.segments[rec.first + k].label;
            if (label) ++counts[*label];
        }
        int best = -1;
        std::size_t best_count = 0;
        for (const auto& [label, c] : counts)
            if (c > best_count) { best = label; best_count = c; }
        return best;
    };

    std::map<int, std::vector<std::size_t>> groups;
    for (const Recording& rec : ds.recordings) groups[stratify ? majority_label(rec) : 0].push_back(rec.id);

    std::array<std::size_t, 3> assigned{};
    std::vector<std::size_t> leftovers;
    for (auto& [key, members] : groups) {
        std::shuffle(members.begin(), members.end(), rng);
        const std::size_t g = members.size();
        std::size_t pos = 0;
        for (std::size_t s = 0; s < 3; ++s) {
            std::size_t quota = stratify ? static_cast<std::size_t>(std::floor(proportions[s] * static_cast<double>(g)))
                                         : target[s];
            quota = std::min({quota, g - pos, target[s] - assigned[s]});
            for (std::size_t k = 0; k < quota; ++k) rec_split[members[pos++]] = static_cast<Split>(s);
            assigned[s] += quota;
        }
        while (pos < g) leftovers.push_back(members[pos++]);
    }
    for (std::size_t rec : leftovers) {
        std::size_t best = 0;
        long best_deficit = -1;
        for (std::size_t s = 0; s < 3; ++s) {
            const long deficit = static_cast<long>(target[s]) - static_cast<long>(assigned[s]);
            if (deficit > best_deficit) { best = s; best_deficit = deficit; }
        }
        rec_split[rec] = static_cast<Split>(best);
        ++assigned[best];
    }

    ds.split.assign(ds.segments.size(), Split::Train);
    for (const Recording& rec : ds.recordings)
        for (std::size_t k = 0; k < rec.count; ++k) ds.split[rec.first + k] = rec_split[rec.id];
}

namespace {

std::string ranges_string(const std::vector<std::size_t>& sorted) {
    std::string out;
    std::size_t i = 0;
    while (i < sorted.size()) {
        std::size_t j = i;
        while (j + 1 < sorted.size() && sorted[j + 1] == sorted[j] + 1) ++j;
        if (!out.empty()) out += ',';
        out += std::to_string(sorted[i]) + ":" + std::to_string(sorted[j] + 1);
        i = j + 1;
    }
    return out;
}

std::pair<std::size_t, std::size_t> parse_range(const std::string& text, const std::string& what) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) {
        throw ConfigError(what + ": expected first:end range, got '" + text + "'");
    }
    const std::size_t first = parse_size(text.substr(0, colon), what);
    const std::size_t end = parse_size(text.substr(colon + 1), what);
    if (end < first) {
        throw ConfigError(what + ": empty or reversed range '" + text + "'");
    }
    return {first, end};
}

std::string join_doubles(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += format_double(v[i]);
    }
    return out;
}

std::vector<double> parse_doubles(const std::string& text, const std::string& what) {
    std::vector<double> out;
    for (const auto& item : split_list(text)) out.push_back(parse_double(item, what));
    return out;
}

const std::string& require_key(const KvSection& section, const std::string& key, const std::string& source) {
    const KvEntry* e = section.find(key);
    if (e == nullptr) {
        throw ConfigError(source + ": [" + section.name + "] is missing key '" + key + "'");
    }
    return e->value;
}

double parse_cell(std::string_view cell, const std::string& file, std::size_t line) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (cell.empty() || ec != std::errc{} || ptr != cell.data() + cell.size()) {
        throw LoadError(file + ":" + std::to_string(line) + ": bad value '" + std::string(cell) + "'");
    }
    return v;
}

}  // namespace

std::filesystem::path write_dataset(const Dataset& ds, const std::filesystem::path& dir) {
    validate(ds);
    std::filesystem::create_directories(dir);
    const auto values_path = dir / "values.csv";
    const auto labels_path = dir / "labels.csv";
    const auto manifest_path = dir / "manifest.ini";
    const bool labelled = ds.has_labels();

    {
        std::ofstream out(values_path);
        if (!out) throw LoadError("cannot write " + values_path.string());
        out << "# one block per segment: #segment,<id>,<recording>,<index>,<label|->, then "
            << ds.length << " rows of " << ds.channels << " values\n";
        for (const Segment& s : ds.segments) {
            out << "#segment," << s.id << ',' << s.recording << ',' << s.index << ','
                << (s.label ? std::to_string(*s.label) : std::string("-")) << '\n';
            for (std::size_t t = 0; t < ds.length; ++t) {
                for (std::size_t v = 0; v < ds.channels; ++v) {
                    if (v) out << ',';
                    out << format_double(s.values[t * ds.channels + v]);
                }
                out << '\n';
            }
        }
    }
    if (labelled) {
        std::ofstream out(labels_path);
        if (!out) throw LoadError("cannot write " + labels_path.string());
        out << "segment,label\n";
        for (const Segment& s : ds.segments) out << s.id << ',' << *s.label << '\n';
    }

    std::ofstream out(manifest_path);
    if (!out) throw LoadError("cannot write " + manifest_path.string());
    out << "[dataset]\n"
        << "name = " << ds.name << '\n'
        << "segment_length = " << ds.length << '\n'
        << "channels = " << ds.channels << '\n'
        << "segments = " << ds.segments.size() << '\n'
        << "values = values.csv\n";
    if (labelled) out << "labels = labels.csv\n";
    out << "\n[recordings]\n";
    for (const Recording& r : ds.recordings) out << r.id << " = " << r.first << ':' << r.first + r.count << '\n';
    out << "\n[splits]\n";
    for (Split s : {Split::Train, Split::Validation, Split::Test})
        out << split_name(s) << " = " << ranges_string(ds.indices(s)) << '\n';
    if (ds.normalization) {
        out << "\n[normalization]\n"
            << "mean = " << join_doubles(ds.normalization->mean) << '\n'
            << "std = " << join_doubles(ds.normalization->stddev) << '\n';
    }
    return manifest_path;
}

Dataset load_dataset(const std::filesystem::path& manifest_path, const LoadOptions& options) {
    if (!std::filesystem::exists(manifest_path)) {
        throw ConfigError("manifest not found: " + manifest_path.string());
    }
    const KvFile kv = read_kv_file(manifest_path);
    const std::string src = manifest_path.string();
    for (const auto& section : kv.sections) {
        if (section.name == "" && section.entries.empty()) continue;
        if (section.name != "dataset" && section.name != "recordings" && section.name != "splits" &&
            section.name != "normalization") {
            throw ConfigError(src + ":" + std::to_string(section.line) + ": unknown section [" + section.name + "]");
        }
    }
    const KvSection* meta = kv.find("dataset");
    const KvSection* recs = kv.find("recordings");
    const KvSection* splits = kv.find("splits");
    if (!meta || !recs || !splits) {
        throw ConfigError(src + ": manifest needs [dataset], [recordings] and [splits] sections");
    }
    for (const auto& e : meta->entries) {
        static const std::vector<std::string> known = {"name", "segment_length", "channels", "segments", "values",
                                                       "labels"};
        if (std::find(known.begin(), known.end(), e.key) == known.end()) {
            throw ConfigError(src + ":" + std::to_string(e.line) + ": unknown key '" + e.key + "' in [dataset]");
        }
    }

    Dataset ds;
    ds.name = require_key(*meta, "name", src);
    ds.length = parse_size(require_key(*meta, "segment_length", src), src + " segment_length");
    ds.channels = parse_size(require_key(*meta, "channels", src), src + " channels");
    const std::size_t count = parse_size(require_key(*meta, "segments", src), src + " segments");
    const auto base = manifest_path.parent_path();
    const auto values_path = base / require_key(*meta, "values", src);

    // Values file.
    {
        std::ifstream in(values_path);
        if (!in) throw LoadError("cannot open values file: " + values_path.string());
        const std::string vsrc = values_path.string();
        std::string line;
        std::size_t line_no = 0;
        Segment* current = nullptr;
        std::size_t rows = 0;
        auto finish = [&] {
            if (current && rows != ds.length) {
                throw LoadError(vsrc + ":" + std::to_string(line_no) + ": segment " + std::to_string(current->id) +
                                " has " + std::to_string(rows) + " rows, expected " + std::to_string(ds.length));
            }
        };
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            if (line.rfind("#segment,", 0) == 0) {
                finish();
                const auto fields = split_list(std::string_view(line).substr(9));
                if (fields.size() != 4) {
                    throw LoadError(vsrc + ":" + std::to_string(line_no) + ": segment header needs 4 fields");
                }
                Segment s;
                try {
                    s.id = parse_size(fields[0], "id");
                    s.recording = parse_size(fields[1], "recording");
                    s.index = parse_size(fields[2], "index");
                    if (fields[3] != "-") s.label = static_cast<int>(parse_int(fields[3], "label"));
                } catch (const ConfigError& e) {
                    throw LoadError(vsrc + ":" + std::to_string(line_no) + ": " + e.what());
                }
                if (s.id != ds.segments.size()) {
                    throw LoadError(vsrc + ":" + std::to_string(line_no) + ": expected segment id " +
                                    std::to_string(ds.segments.size()) + ", got " + std::to_string(s.id));
                }
                s.values.reserve(ds.length * ds.channels);
                ds.segments.push_back(std::move(s));
                current = &ds.segments.back();
                rows = 0;
                continue;
            }
            if (line[0] == '#') continue;
            if (!current) {
                throw LoadError(vsrc + ":" + std::to_string(line_no) + ": values before first segment header");
            }
            if (rows == ds.length) {
                throw LoadError(vsrc + ":" + std::to_string(line_no) + ": segment " + std::to_string(current->id) +
                                " has more than " + std::to_string(ds.length) + " rows");
            }
            std::size_t cols = 0;
            std::string_view rest(line);
            while (true) {
                const auto comma = rest.find(',');
                current->values.push_back(parse_cell(rest.substr(0, comma), vsrc, line_no));
                ++cols;
                if (comma == std::string_view::npos) break;
                rest.remove_prefix(comma + 1);
            }
            if (cols != ds.channels) {
                throw LoadError(vsrc + ":" + std::to_string(line_no) + ": row has " + std::to_string(cols) +
                                " columns, expected " + std::to_string(ds.channels));
            }
            ++rows;
        }
        finish();
        if (ds.segments.size() != count) {
            throw LoadError(vsrc + ": holds " + std::to_string(ds.segments.size()) + " segments, manifest says " +
                            std::to_string(count));
        }
    }

    // Optional labels file; it must agree with the block headers.
    if (const KvEntry* lab = meta->find("labels")) {
        const auto labels_path = base / lab->value;
        std::ifstream in(labels_path);
        if (!in) throw LoadError("cannot open labels file: " + labels_path.string());
        const std::string lsrc = labels_path.string();
        std::string line;
        std::size_t line_no = 0, seen = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty() || line_no == 1) continue;
            const auto fields = split_list(line);
            if (fields.size() != 2) throw LoadError(lsrc + ":" + std::to_string(line_no) + ": expected segment,label");
            std::size_t id = 0;
            int label = 0;
            try {
                id = parse_size(fields[0], "segment");
                label = static_cast<int>(parse_int(fields[1], "label"));
            } catch (const ConfigError& e) {
                throw LoadError(lsrc + ":" + std::to_string(line_no) + ": " + e.what());
            }
            if (id >= ds.segments.size()) {
                throw LoadError(lsrc + ":" + std::to_string(line_no) + ": unknown segment " + std::to_string(id));
            }
            auto& slot = ds.segments[id].label;
            if (slot && *slot != label) {
                throw LoadError(lsrc + ":" + std::to_string(line_no) + ": label for segment " + std::to_string(id) +
                                " disagrees with values file");
            }
            slot = label;
            ++seen;
        }
        if (seen != ds.segments.size()) {
            throw LoadError(lsrc + ": has " + std::to_string(seen) + " rows, expected " +
                            std::to_string(ds.segments.size()));
        }
    }

    for (const auto& e : recs->entries) {
        const std::size_t id = parse_size(e.key, src + " recording id");
        const auto [first, end] = parse_range(e.value, src + ":" + std::to_string(e.line));
        ds.recordings.push_back(Recording{id, first, end - first});
    }
    std::sort(ds.recordings.begin(), ds.recordings.end(),
              [](const Recording& a, const Recording& b) { return a.id < b.id; });

    std::vector<int> owner(ds.segments.size(), -1);
    for (const auto& e : splits->entries) {
        Split s;
        if (e.key == "train") s = Split::Train;
        else if (e.key == "validation") s = Split::Validation;
        else if (e.key == "test") s = Split::Test;
        else throw ConfigError(src + ":" + std::to_string(e.line) + ": unknown split '" + e.key + "'");
        for (const auto& item : split_list(e.value)) {
            const auto [first, end] = parse_range(item, src + ":" + std::to_string(e.line));
            for (std::size_t i = first; i < end; ++i) {
                if (i >= owner.size()) {
                    throw ConfigError(src + ":" + std::to_string(e.line) + ": split '" + e.key +
                                      "' names segment " + std::to_string(i) + " beyond the corpus");
                }
                if (owner[i] >= 0) {
                    throw ConfigError(src + ":" + std::to_string(e.line) + ": segment " + std::to_string(i) +
                                      " appears in both '" + split_name(static_cast<Split>(owner[i])) + "' and '" +
                                      e.key + "'");
                }
                owner[i] = static_cast<int>(s);
            }
        }
    }
    for (std::size_t i = 0; i < owner.size(); ++i) {
        if (owner[i] < 0) {
            throw ConfigError(src + ": segment " + std::to_string(i) + " is in no split");
        }
        ds.split.push_back(static_cast<Split>(owner[i]));
    }

    if (const KvSection* norm = kv.find("normalization")) {
        Normalization stats;
        stats.mean = parse_doubles(require_key(*norm, "mean", src), src + " normalization mean");
        stats.stddev = parse_doubles(require_key(*norm, "std", src), src + " normalization std");
        ds.normalization = std::move(stats);
    }
    validate(ds);
    if (options.normalize) {
        const Normalization stats = ds.normalization ? *ds.normalization : compute_normalization(ds);
        apply_normalization(ds, stats);
    }
    return ds;
}

}  // namespace statiocl::data
