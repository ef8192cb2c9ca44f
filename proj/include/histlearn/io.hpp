#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "histlearn/domain.hpp"
#include "histlearn/histogram.hpp"
#include "histlearn/online.hpp"

namespace histlearn::io {

// CSV formats. Every file starts with a '#' metadata line carrying
// dims=<d> domain=<r1,...,rd> and format-specific fields. Real values are
// written with full round-trip precision.

/// Dataset: `# dims=.. domain=.. total=..`, rows `i1,...,id,count` for
/// nonzero cells only.
void write_dataset(const std::string& path, const FrequencyTensor& freq);
FrequencyTensor read_dataset(const std::string& path);

/// Queries: rows `l1,u1,...,ld,ud`. Feedback rows carry a trailing
/// cardinality column; read_queries accepts both and drops it.
void write_queries(const std::string& path, const AttributeDomain& dom,
                   std::span<const RangeQuery> queries);
std::pair<AttributeDomain, std::vector<RangeQuery>> read_queries(const std::string& path);

void write_qfrs(const std::string& path, const AttributeDomain& dom,
                std::span<const QueryFeedbackRecord> qfrs);
std::pair<AttributeDomain, std::vector<QueryFeedbackRecord>> read_qfrs(const std::string& path);

/// Histogram: rows `l1,u1,...,ld,ud,count`.
void write_histogram(const std::string& path, const BucketHistogram& h);
BucketHistogram read_histogram(const std::string& path);

/// Sketch: `# dims=.. domain=.. padded=..`, rows `index,value`.
void write_sketch(const std::string& path, const WaveletSketch& sk);
WaveletSketch read_sketch(const std::string& path);

/// Trajectory: header `step,avg_rel_error`, one row per evaluation.
void write_trajectory(const std::string& path, std::span<const online::TrajectoryPoint> traj);

}  // namespace histlearn::io
