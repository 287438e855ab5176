#pragma once

// Demonstrations, embeddings and selections, plus their line-delimited file
// formats. Frame indices are 0-based everywhere.
//
// Ground-truth labels (which frames are extraneous, the goal) live in
// Trajectory::truth. Learning and alignment code consumes frames or
// embeddings only; scoring code in metrics is the sole reader of `truth`.

#include <cstddef>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "eil/matrix.hpp"

namespace eil {

enum class ActionKind { continuous, discrete };

struct Frame {
  std::vector<double> observation;
  std::vector<double> action;  // continuous tasks
  int category = -1;           // discrete tasks

  friend bool operator==(const Frame&, const Frame&) = default;
};

/// Half-open [start, end) frame interval.
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - start; }
  friend bool operator==(const Span&, const Span&) = default;
};

/// Generator metadata. Never read by learning or alignment code.
struct GroundTruth {
  std::vector<double> goal;
  std::vector<bool> extraneous;  // one flag per frame
  std::vector<Span> spans;

  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

struct Trajectory {
  std::string id;
  std::vector<Frame> frames;
  GroundTruth truth;

  std::size_t size() const { return frames.size(); }
  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

struct Dataset {
  std::string env_name;
  std::size_t d_obs = 0;
  std::size_t d_act = 0;  // number of categories for discrete tasks
  ActionKind action_kind = ActionKind::continuous;
  std::vector<Trajectory> trajectories;

  std::size_t size() const { return trajectories.size(); }
  const Trajectory& find(const std::string& id) const;
  friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct EmbeddingSequence {
  std::string trajectory_id;
  Matrix vectors;  // one row per frame

  std::size_t size() const { return vectors.rows(); }
  std::size_t dim() const { return vectors.cols(); }
};

struct Selection {
  std::string trajectory_id;
  std::vector<std::size_t> kept;  // strictly increasing

  friend bool operator==(const Selection&, const Selection&) = default;
};

/// Sorted disjoint spans covering exactly the set flags.
std::vector<Span> spans_from_flags(const std::vector<bool>& flags);
std::vector<bool> flags_from_spans(const std::vector<Span>& spans, std::size_t length);

/// Throws DataError naming the trajectory when spans and flags disagree,
/// spans overlap or leave bounds, or extraneous frames reach half the
/// trajectory.
void validate_trajectory(const Trajectory& t, const Dataset& owner);
/// Checks K >= 2, shared dimensions and every trajectory.
void validate_dataset(const Dataset& d);
/// Throws DataError unless `s` is strictly increasing, non-empty and within
/// `length`.
void validate_selection(const Selection& s, std::size_t length);

/// Copy of `t` restricted to `kept` (which must be a valid selection);
/// labels follow their frames and spans are recomputed.
Trajectory select_frames(const Trajectory& t, const std::vector<std::size_t>& kept);

Dataset load_dataset(const std::filesystem::path& path);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);

std::vector<Selection> load_selections(const std::filesystem::path& path);
void save_selections(const std::vector<Selection>& selections, const std::filesystem::path& path);

}  // namespace eil
