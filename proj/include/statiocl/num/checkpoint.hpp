#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "statiocl/num/optim.hpp"

namespace statiocl::num {

/// Checkpoint file layout (all integers and floats little-endian):
///
///   magic        8 bytes  "STCLCKPT"
///   version      u32      kCheckpointVersion
///   epoch        u64      completed epochs
///   count        u32      number of parameters P
///   P times:
///     name_len   u32, name bytes (UTF-8, no terminator)
///     rank       u32, rank x u64 dims
///     values     prod(dims) x f64 (IEEE-754 binary64)
///   has_adam     u8       0 or 1
///   if has_adam:
///     step       u64
///     P times:   first moment values, prod(dims) x f64
///     P times:   second moment values, prod(dims) x f64
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    std::uint64_t epoch = 0;
    ParameterSet params;
    std::optional<AdamState> adam;

    friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);

/// Throws LoadError on bad magic, unsupported version, truncation or trailing bytes.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Throws DimensionError unless `loaded` has exactly the names and shapes of `expected`.
void require_matching_layout(const ParameterSet& expected, const ParameterSet& loaded);

}  // namespace statiocl::num
