#include "reshape/datagen.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace reshape {

namespace {

constexpr double kWeightTolerance = 1e-6;

using WeightTable = std::vector<std::pair<Key, double>>;

WeightTable fixed_table(const std::map<Key, double>& weights) {
    return WeightTable(weights.begin(), weights.end());
}

WeightTable uniform_table(Key key_count) {
    WeightTable t;
    for (Key k = 0; k < key_count; ++k) t.emplace_back(k, 1.0 / static_cast<double>(key_count));
    return t;
}

WeightTable zipf_table(Key key_count, double s) {
    WeightTable t;
    double norm = 0.0;
    for (Key k = 0; k < key_count; ++k) norm += 1.0 / std::pow(static_cast<double>(k + 1), s);
    for (Key k = 0; k < key_count; ++k) t.emplace_back(k, 1.0 / std::pow(static_cast<double>(k + 1), s) / norm);
    return t;
}

WeightTable segment_table(const Segment& seg, Key key_count) {
    std::map<Key, double> w = seg.weights;
    if (seg.fill_uniform) {
        double used = 0.0;
        for (const auto& [_, v] : w) used += v;
        const auto rest = key_count - static_cast<Key>(w.size());
        if (rest > 0) {
            const double each = (1.0 - used) / static_cast<double>(rest);
            for (Key k = 0; k < key_count; ++k)
                if (!w.count(k)) w[k] = each;
        }
    }
    return fixed_table(w);
}

void check_sum(const WeightTable& t, const char* what) {
    double sum = 0.0;
    for (const auto& [_, w] : t) {
        if (w < 0.0) throw ConfigError(std::string(what) + ": negative weight");
        sum += w;
    }
    if (std::abs(sum - 1.0) > kWeightTolerance)
        throw ConfigError(std::string(what) + ": weights sum to " + std::to_string(sum) + ", expected 1");
}

// Draws keys from one weight table, either as exact quotas (smooth weighted
// round-robin) or as independent multinomial draws.
class KeySampler {
  public:
    KeySampler(WeightTable table, SamplingMode mode, std::mt19937_64& rng)
        : table_(std::move(table)), mode_(mode), rng_(rng), credit_(table_.size(), 0.0) {
        std::vector<double> w;
        for (const auto& [_, v] : table_) w.push_back(v);
        dist_ = std::discrete_distribution<std::size_t>(w.begin(), w.end());
    }

    Key next() {
        if (mode_ == SamplingMode::Multinomial) return table_[dist_(rng_)].first;
        std::size_t best = 0;
        for (std::size_t i = 0; i < table_.size(); ++i) {
            credit_[i] += table_[i].second;
            if (credit_[i] > credit_[best] + 1e-12) best = i;
        }
        credit_[best] -= 1.0;
        return table_[best].first;
    }

  private:
    WeightTable table_;
    SamplingMode mode_;
    std::mt19937_64& rng_;
    std::vector<double> credit_;
    std::discrete_distribution<std::size_t> dist_;
};

std::vector<Record> load_csv(const GeneratorSpec& spec) {
    std::ifstream in(spec.csv_path);
    if (!in) throw ConfigError("cannot open dataset " + spec.csv_path);
    std::vector<Record> out;
    std::map<Key, Seq> seqs;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        const std::string key_text = line.substr(0, comma);
        Key key = 0;
        try {
            std::size_t used = 0;
            key = std::stoll(key_text, &used);
            if (used != key_text.size()) throw std::invalid_argument(key_text);
        } catch (const std::exception&) {
            if (first) {
                first = false;
                continue;  // header row
            }
            throw ConfigError("dataset " + spec.csv_path + ": bad key '" + key_text + "'");
        }
        first = false;
        std::string payload = comma == std::string::npos ? std::string() : line.substr(comma + 1);
        out.push_back({key, seqs[key]++, std::move(payload)});
    }
    return out;
}

}  // namespace

void GeneratorSpec::validate() const {
    switch (kind) {
        case GeneratorKind::Csv:
            if (csv_path.empty()) throw ConfigError("csv generator needs a path");
            return;
        case GeneratorKind::FixedWeights:
            if (weights.empty()) throw ConfigError("fixed_weights generator needs weights");
            check_sum(fixed_table(weights), "fixed_weights");
            break;
        case GeneratorKind::Zipf:
        case GeneratorKind::Uniform:
            if (key_count <= 0) throw ConfigError("key_count must be positive");
            if (kind == GeneratorKind::Zipf && !(zipf_exponent >= 0.0)) throw ConfigError("zipf exponent must be >= 0");
            break;
        case GeneratorKind::Shifting: {
            if (segments.empty()) throw ConfigError("shifting generator needs segments");
            std::uint64_t sum = 0;
            for (const auto& s : segments) {
                check_sum(segment_table(s, key_count), "shifting segment");
                sum += s.records;
            }
            if (total != 0 && sum != total) throw ConfigError("segment records do not add up to total");
            return;
        }
    }
    if (total == 0) throw ConfigError("total records must be positive");
}

std::vector<Record> generate(const GeneratorSpec& spec) {
    spec.validate();
    if (spec.kind == GeneratorKind::Csv) return load_csv(spec);

    std::mt19937_64 rng(spec.seed);
    std::vector<std::pair<std::uint64_t, WeightTable>> plan;
    switch (spec.kind) {
        case GeneratorKind::FixedWeights: plan.emplace_back(spec.total, fixed_table(spec.weights)); break;
        case GeneratorKind::Uniform: plan.emplace_back(spec.total, uniform_table(spec.key_count)); break;
        case GeneratorKind::Zipf: plan.emplace_back(spec.total, zipf_table(spec.key_count, spec.zipf_exponent)); break;
        case GeneratorKind::Shifting:
            for (const auto& s : spec.segments) plan.emplace_back(s.records, segment_table(s, spec.key_count));
            break;
        case GeneratorKind::Csv: break;
    }

    const std::string filler(spec.payload_bytes, 'x');
    std::vector<Record> out;
    std::map<Key, Seq> seqs;
    for (auto& [count, table] : plan) {
        KeySampler sampler(std::move(table), spec.mode, rng);
        for (std::uint64_t i = 0; i < count; ++i) {
            const Key k = sampler.next();
            out.push_back({k, seqs[k]++, filler});
        }
    }
    return out;
}

std::map<Key, std::uint64_t> key_counts(const std::vector<Record>& records) {
    std::map<Key, std::uint64_t> out;
    for (const auto& r : records) ++out[r.key];
    return out;
}

}  // namespace reshape
