#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

#include "evadkit/event_model.hpp"

namespace evadkit {

struct DensityProfile {
    Eigen::VectorXd d;     // non-negative, sums to 1
    bool from_raw = true;  // raw_count vs rendered_count source
};

enum class Provenance { High, Low };

struct SampleSet {
    std::vector<Eigen::Index> indices;       // strictly increasing
    std::vector<Provenance> provenance;      // aligned with indices
    std::uint64_t seed = 0;
    bool truncated = false;  // requested more samples than frames exist
};

struct EDSConfig {
    double tau_d = 0.95;
    double ratio_high = 0.8;
    std::size_t sample_count = 256;
    std::uint64_t seed = 0;
};

// d_i = n_i / sum_j n_j over the per-frame event counts. Throws on all-zero
// counts (degenerate video).
DensityProfile compute_density(const FrameSequence& frames, bool use_raw = true);
DensityProfile density_from_counts(const std::vector<std::uint64_t>& counts, bool from_raw = true);

struct NucleusPartition {
    std::vector<Eigen::Index> high;  // ascending frame indices
    std::vector<Eigen::Index> low;
};

// Sort by density descending (ties broken by lower index), take the shortest
// prefix whose cumulative density strictly exceeds tau_d.
NucleusPartition nucleus_partition(const DensityProfile& profile, double tau_d);

// Dual-interval draw: round(ratio_high * sample_count) from the high set and
// the rest from the low set, each by weighted sampling without replacement
// (uniform fallback when a set carries zero mass). Short sets spill their
// quota to the other set. Result sorted ascending, deterministic per seed.
SampleSet eds_sample(const DensityProfile& profile, const EDSConfig& config);

// Evenly spaced deterministic baseline, used by the sampler ablation.
SampleSet uniform_sample(Eigen::Index frame_count, std::size_t sample_count);

// One `index,provenance` line per selected frame.
void write_samples_file(const SampleSet& samples, const std::string& path);
SampleSet read_samples_file(const std::string& path);

}  // namespace evadkit
