#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace statiocl::data {

enum class Split : std::uint8_t { Train = 0, Validation = 1, Test = 2 };

const char* split_name(Split s);

/// One anchor sample: a T x V grid stored time-major (value(t, v) = values[t * V + v]).
struct Segment {
    std::size_t id = 0;
    std::size_t recording = 0;
    std::size_t index = 0;  ///< position inside its recording
    std::optional<int> label;
    std::vector<double> values;

    friend bool operator==(const Segment&, const Segment&) = default;
};

/// Contiguous run of segments [first, first + count) from one source sequence.
struct Recording {
    std::size_t id = 0;
    std::size_t first = 0;
    std::size_t count = 0;

    friend bool operator==(const Recording&, const Recording&) = default;
};

struct Normalization {
    std::vector<double> mean;
    std::vector<double> stddev;

    friend bool operator==(const Normalization&, const Normalization&) = default;
};

/// A corpus plus its manifest: recordings, split assignment and normalization.
///
/// Invariants (checked by validate()): segment ids equal their position; each
/// segment has length * channels values; recordings tile the segment range in
/// order; every segment has exactly one split and no recording straddles splits.
struct Dataset {
    std::string name;
    std::size_t length = 0;
    std::size_t channels = 0;
    std::vector<Segment> segments;
    std::vector<Recording> recordings;
    std::vector<Split> split;  ///< per segment
    std::optional<Normalization> normalization;
    bool normalized = false;

    [[nodiscard]] std::vector<std::size_t> indices(Split s) const;
    [[nodiscard]] bool has_labels() const;
    /// Segments per recording, or 0 when recordings have unequal sizes.
    [[nodiscard]] std::size_t uniform_recording_size() const;
};

/// Throws ConfigError describing the first violated invariant.
void validate(const Dataset& dataset);

/// Per-channel mean and population std over the training split.
Normalization compute_normalization(const Dataset& dataset);

/// Z-normalizes values in place with `stats` (a zero std is treated as 1).
void apply_normalization(Dataset& dataset, const Normalization& stats);

/// FNV-1a over the shape, metadata and raw value bits.
std::uint64_t dataset_hash(const Dataset& dataset);

/// Assigns splits at the recording level. Proportions must sum to 1. When
/// `stratify` is set, recordings are grouped by their majority label and each
/// group is spread across splits in proportion.
void assign_splits(Dataset& dataset, const std::array<double, 3>& proportions, std::uint64_t seed,
                   bool stratify);

struct LoadOptions {
    bool normalize = true;
};

/// Writes `<dir>/manifest.ini`, `<dir>/values.csv` and, when labels exist,
/// `<dir>/labels.csv`. Returns the manifest path.
std::filesystem::path write_dataset(const Dataset& dataset, const std::filesystem::path& dir);

/// Reads a manifest and the files it names (paths relative to the manifest).
/// Throws LoadError naming the file and line on inconsistent content.
Dataset load_dataset(const std::filesystem::path& manifest_path, const LoadOptions& options = {});

}  // namespace statiocl::data
