#include "evadkit/sampling.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "evadkit/common.hpp"

namespace evadkit {

DensityProfile density_from_counts(const std::vector<std::uint64_t>& counts, bool from_raw) {
    if (counts.empty())
        throw std::invalid_argument("compute_density: no frames");
    std::uint64_t total = 0;
    for (auto c : counts) total += c;
    if (total == 0)
        throw std::invalid_argument("compute_density: all-zero event counts (degenerate video)");
    DensityProfile profile;
    profile.from_raw = from_raw;
    profile.d.resize(static_cast<Eigen::Index>(counts.size()));
    for (std::size_t i = 0; i < counts.size(); ++i)
        profile.d[static_cast<Eigen::Index>(i)] =
            static_cast<double>(counts[i]) / static_cast<double>(total);
    return profile;
}

DensityProfile compute_density(const FrameSequence& frames, bool use_raw) {
    std::vector<std::uint64_t> counts;
    counts.reserve(frames.frames.size());
    for (const EventFrame& f : frames.frames)
        counts.push_back(use_raw ? f.raw_count : f.rendered_count);
    return density_from_counts(counts, use_raw);
}

NucleusPartition nucleus_partition(const DensityProfile& profile, double tau_d) {
    const Eigen::Index n = profile.d.size();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        if (profile.d[a] != profile.d[b]) return profile.d[a] > profile.d[b];
        return a < b;  // ties broken by lower index first
    });

    NucleusPartition part;
    double cum = 0.0;
    std::size_t cut = order.size();
    // The boundary slack absorbs decimal-literal rounding so a cumulative sum
    // that equals tau in exact arithmetic does not spuriously exceed it.
    constexpr double kBoundaryTol = 1e-12;
    for (std::size_t i = 0; i < order.size(); ++i) {
        cum += profile.d[order[i]];
        if (cum > tau_d + kBoundaryTol) {
            cut = i + 1;
            break;
        }
    }
    part.high.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(cut));
    part.low.assign(order.begin() + static_cast<std::ptrdiff_t>(cut), order.end());
    std::sort(part.high.begin(), part.high.end());
    std::sort(part.low.begin(), part.low.end());
    return part;
}

namespace {

// Weighted draw without replacement via sequential renormalized draws.
// All-zero weights fall back to uniform over the remaining candidates.
std::vector<Eigen::Index> draw_without_replacement(std::vector<Eigen::Index> pool,
                                                   const Eigen::VectorXd& weights,
                                                   std::size_t count, Rng& rng) {
    std::vector<Eigen::Index> chosen;
    chosen.reserve(count);
    std::vector<double> w;
    w.reserve(pool.size());
    for (Eigen::Index idx : pool) w.push_back(weights[idx]);

    while (chosen.size() < count && !pool.empty()) {
        double total = std::accumulate(w.begin(), w.end(), 0.0);
        std::size_t pick = 0;
        if (total <= 0.0) {
            pick = static_cast<std::size_t>(rng.below(pool.size()));
        } else {
            double u = rng.uniform() * total;
            double cum = 0.0;
            pick = pool.size() - 1;
            for (std::size_t i = 0; i < pool.size(); ++i) {
                cum += w[i];
                if (u < cum) {
                    pick = i;
                    break;
                }
            }
        }
        chosen.push_back(pool[pick]);
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
        w.erase(w.begin() + static_cast<std::ptrdiff_t>(pick));
    }
    return chosen;
}

}  // namespace

SampleSet eds_sample(const DensityProfile& profile, const EDSConfig& config) {
    if (config.sample_count < 1)
        throw std::invalid_argument("eds_sample: sample_count must be at least 1");
    if (config.tau_d <= 0.0 || config.tau_d >= 1.0)
        throw std::invalid_argument("eds_sample: tau_d must lie in (0,1)");
    if (config.ratio_high < 0.0 || config.ratio_high > 1.0)
        throw std::invalid_argument("eds_sample: ratio_high must lie in [0,1]");

    const auto frame_count = static_cast<std::size_t>(profile.d.size());
    SampleSet result;
    result.seed = config.seed;

    if (config.sample_count >= frame_count) {
        // Everything is selected; provenance still reflects the partition.
        result.truncated = config.sample_count > frame_count;
        NucleusPartition part = nucleus_partition(profile, config.tau_d);
        std::vector<bool> is_high(frame_count, false);
        for (Eigen::Index i : part.high) is_high[static_cast<std::size_t>(i)] = true;
        for (std::size_t i = 0; i < frame_count; ++i) {
            result.indices.push_back(static_cast<Eigen::Index>(i));
            result.provenance.push_back(is_high[i] ? Provenance::High : Provenance::Low);
        }
        return result;
    }

    NucleusPartition part = nucleus_partition(profile, config.tau_d);
    std::size_t n_high = static_cast<std::size_t>(
        std::max<std::int64_t>(0, round_half_up(config.ratio_high *
                                                static_cast<double>(config.sample_count))));
    n_high = std::min(n_high, config.sample_count);
    std::size_t n_low = config.sample_count - n_high;

    // Spill quota the other way when a set is too small.
    if (part.high.size() < n_high) {
        n_low += n_high - part.high.size();
        n_high = part.high.size();
    }
    if (part.low.size() < n_low) {
        std::size_t spill = n_low - part.low.size();
        n_low = part.low.size();
        n_high = std::min(part.high.size(), n_high + spill);
    }

    Rng rng(config.seed);
    std::vector<Eigen::Index> high_picks =
        draw_without_replacement(part.high, profile.d, n_high, rng);
    std::vector<Eigen::Index> low_picks = draw_without_replacement(part.low, profile.d, n_low, rng);

    std::vector<std::pair<Eigen::Index, Provenance>> merged;
    merged.reserve(high_picks.size() + low_picks.size());
    for (Eigen::Index i : high_picks) merged.emplace_back(i, Provenance::High);
    for (Eigen::Index i : low_picks) merged.emplace_back(i, Provenance::Low);
    std::sort(merged.begin(), merged.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    for (auto& [idx, prov] : merged) {
        result.indices.push_back(idx);
        result.provenance.push_back(prov);
    }
    return result;
}

SampleSet uniform_sample(Eigen::Index frame_count, std::size_t sample_count) {
    SampleSet result;
    auto n = static_cast<std::size_t>(frame_count);
    if (sample_count >= n) {
        result.truncated = sample_count > n;
        for (std::size_t i = 0; i < n; ++i) {
            result.indices.push_back(static_cast<Eigen::Index>(i));
            result.provenance.push_back(Provenance::High);
        }
        return result;
    }
    for (std::size_t j = 0; j < sample_count; ++j) {
        auto idx = static_cast<Eigen::Index>(
            (static_cast<double>(j) + 0.5) * static_cast<double>(n) /
            static_cast<double>(sample_count));
        result.indices.push_back(idx);
        result.provenance.push_back(Provenance::High);
    }
    return result;
}

void write_samples_file(const SampleSet& samples, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError(IoError::Kind::Missing, "cannot open for writing: " + path);
    for (std::size_t i = 0; i < samples.indices.size(); ++i)
        out << samples.indices[i] << ','
            << (samples.provenance[i] == Provenance::High ? "high" : "low") << '\n';
}

SampleSet read_samples_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError(IoError::Kind::Missing, "cannot open: " + path);
    SampleSet samples;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        auto comma = line.find(',');
        if (comma == std::string::npos)
            throw IoError(IoError::Kind::Parse, path + ": unparsable row " + std::to_string(row));
        long long idx = 0;
        try {
            idx = std::stoll(line.substr(0, comma));
        } catch (const std::exception&) {
            throw IoError(IoError::Kind::Parse, path + ": bad index at row " + std::to_string(row));
        }
        std::string prov = line.substr(comma + 1);
        if (prov != "high" && prov != "low")
            throw IoError(IoError::Kind::Parse,
                          path + ": provenance must be high|low at row " + std::to_string(row));
        samples.indices.push_back(static_cast<Eigen::Index>(idx));
        samples.provenance.push_back(prov == "high" ? Provenance::High : Provenance::Low);
    }
    return samples;
}

}  // namespace evadkit
