#pragma once

// Frame filters over embedding sequences. None of them see ground truth.

#include <cstddef>
#include <utility>
#include <vector>

#include "eil/domain.hpp"

namespace eil {

struct UvaOptions {
  /// Also keep each round's Voting-stage frames (merged, sorted, deduplicated).
  bool keep_voting_frames = false;
};

/// Per-video progress while UVA runs.
struct UvaState {
  std::vector<std::size_t> voting_frame;
  std::vector<bool> done;
  std::vector<std::vector<std::size_t>> selections;
};

/// Unsupervised voting-based alignment.
///
/// Every video starts with frame 0 as its voting frame (and in its
/// selection). Each round, over the videos not yet done:
///   Proposal:  each voting frame casts one ballot in every other video, for
///              its hard nearest neighbor there.
///   Voting:    in each video the most-balloted frame (smallest index on
///              ties) is that video's vote; a video with no ballots votes
///              for its own voting frame. The mean of the votes is the
///              virtual reference.
///   Selection: each video moves its voting frame to the nearest neighbor of
///              the virtual reference strictly after the current one, and
///              appends it to its selection.
/// A video whose voting frame is its last frame is done. Rounds repeat until
/// every video is done.
std::vector<Selection> uva(const std::vector<EmbeddingSequence>& seqs, const UvaOptions& opts = {});

/// For every reference frame, each video keeps its hard nearest neighbor.
/// No order constraint; kept indices are deduplicated and sorted.
std::vector<Selection> reference_nn_filter(const EmbeddingSequence& reference,
                                           const std::vector<EmbeddingSequence>& videos);

struct DtwResult {
  std::vector<std::pair<std::size_t, std::size_t>> path;  // (reference, video)
  double cost = 0.0;
};

/// Classic dynamic time warping with Euclidean frame cost, steps (i+1, j),
/// (i, j+1), (i+1, j+1), from (0, 0) to (N-1, M-1). Ties prefer the diagonal
/// step, then (i, j+1).
DtwResult dtw_align(const EmbeddingSequence& reference, const EmbeddingSequence& video);

/// Video frames matched by a warping path: for each reference frame, the
/// path cell with the smallest frame distance (smallest video index on ties).
Selection dtw_selection(const DtwResult& result, const EmbeddingSequence& reference,
                        const EmbeddingSequence& video);
std::vector<Selection> reference_dtw_filter(const EmbeddingSequence& reference,
                                            const std::vector<EmbeddingSequence>& videos);

/// Keeps only the selected frames. Throws DataError for an empty or
/// out-of-range selection.
Trajectory apply_selection(const Trajectory& trajectory, const Selection& selection);
/// Applies a selection to every trajectory, matching by id.
Dataset apply_selections(const Dataset& dataset, const std::vector<Selection>& selections);

}  // namespace eil
