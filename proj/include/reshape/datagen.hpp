#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "reshape/types.hpp"

namespace reshape {

enum class GeneratorKind : std::uint8_t { FixedWeights, Zipf, Shifting, Uniform, Csv };
enum class SamplingMode : std::uint8_t { Exact, Multinomial };

/// One segment of a shifting distribution. Keys without an explicit weight
/// share the remaining mass uniformly when `fill_uniform` is set.
struct Segment {
    std::uint64_t records = 0;
    std::map<Key, double> weights;
    bool fill_uniform = false;
};

struct GeneratorSpec {
    GeneratorKind kind = GeneratorKind::Uniform;
    SamplingMode mode = SamplingMode::Exact;
    Key key_count = 0;
    std::uint64_t total = 0;
    std::map<Key, double> weights;  // FixedWeights
    double zipf_exponent = 1.0;
    std::vector<Segment> segments;  // Shifting
    std::string csv_path;
    std::size_t payload_bytes = 8;
    std::uint64_t seed = 1;

    void validate() const;
};

/// Materialises the whole stream. Per-key seq starts at 0 and increases by one.
std::vector<Record> generate(const GeneratorSpec& spec);

/// Per-key record counts of a stream.
std::map<Key, std::uint64_t> key_counts(const std::vector<Record>& records);

}  // namespace reshape
