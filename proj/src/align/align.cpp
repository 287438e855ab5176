#include "eil/align.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "eil/error.hpp"
#include "eil/kernels.hpp"

namespace eil {

namespace {

void check_sequences(const std::vector<EmbeddingSequence>& seqs) {
  if (seqs.empty()) throw UsageError("no sequences to align");
  const std::size_t d = seqs.front().dim();
  for (const auto& s : seqs) {
    if (s.size() == 0) throw UsageError("sequence '" + s.trajectory_id + "' is empty");
    if (s.dim() != d) throw UsageError("sequence '" + s.trajectory_id + "' has mismatched embedding size");
  }
}

std::size_t nearest(const EmbeddingSequence& seq, const double* query, std::size_t begin = 0) {
  return kernels::nearest_row(query, seq.vectors.data(), seq.size(), seq.dim(), begin);
}

}  // namespace

std::vector<Selection> uva(const std::vector<EmbeddingSequence>& seqs, const UvaOptions& opts) {
  check_sequences(seqs);
  const std::size_t k = seqs.size();
  const std::size_t d = seqs.front().dim();

  UvaState st;
  st.voting_frame.assign(k, 0);
  st.done.assign(k, false);
  st.selections.assign(k, {0});
  std::vector<std::vector<std::size_t>> votes(k);

  std::vector<std::vector<std::size_t>> ballots(k);
  for (;;) {
    std::vector<std::size_t> active;
    for (std::size_t v = 0; v < k; ++v) {
      if (!st.done[v] && st.voting_frame[v] + 1 >= seqs[v].size()) st.done[v] = true;
      if (!st.done[v]) active.push_back(v);
    }
    if (active.empty()) break;

    // Proposal
    for (std::size_t v : active) ballots[v].assign(seqs[v].size(), 0);
    for (std::size_t from : active) {
      const double* q = seqs[from].vectors.data() + st.voting_frame[from] * d;
      for (std::size_t to : active) {
        if (to != from) ++ballots[to][nearest(seqs[to], q)];
      }
    }

    // Voting
    std::vector<const double*> vote_rows;
    for (std::size_t v : active) {
      std::size_t best = st.voting_frame[v];
      std::size_t best_count = 0;
      for (std::size_t f = 0; f < ballots[v].size(); ++f) {
        if (ballots[v][f] > best_count) {
          best_count = ballots[v][f];
          best = f;
        }
      }
      votes[v].push_back(best);
      vote_rows.push_back(seqs[v].vectors.data() + best * d);
    }
    // Sum in a canonical (lexicographic) order so the reference does not
    // depend on the order the videos were given in.
    std::sort(vote_rows.begin(), vote_rows.end(), [d](const double* a, const double* b) {
      return std::lexicographical_compare(a, a + d, b, b + d);
    });
    std::vector<double> reference(d, 0.0);
    for (const double* r : vote_rows)
      for (std::size_t c = 0; c < d; ++c) reference[c] += r[c];
    for (double& x : reference) x /= static_cast<double>(vote_rows.size());

    // Selection, restricted to frames after the current voting frame.
    for (std::size_t v : active) {
      const std::size_t next = nearest(seqs[v], reference.data(), st.voting_frame[v] + 1);
      st.voting_frame[v] = next;
      st.selections[v].push_back(next);
    }
  }

  std::vector<Selection> out;
  out.reserve(k);
  for (std::size_t v = 0; v < k; ++v) {
    std::vector<std::size_t> kept = st.selections[v];
    if (opts.keep_voting_frames) {
      kept.insert(kept.end(), votes[v].begin(), votes[v].end());
      std::sort(kept.begin(), kept.end());
      kept.erase(std::unique(kept.begin(), kept.end()), kept.end());
    }
    out.push_back({seqs[v].trajectory_id, std::move(kept)});
  }
  return out;
}

std::vector<Selection> reference_nn_filter(const EmbeddingSequence& reference,
                                           const std::vector<EmbeddingSequence>& videos) {
  std::vector<EmbeddingSequence> all{reference};
  all.insert(all.end(), videos.begin(), videos.end());
  check_sequences(all);
  std::vector<Selection> out;
  for (const auto& video : videos) {
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < reference.size(); ++i) {
      kept.push_back(nearest(video, reference.vectors.data() + i * reference.dim()));
    }
    std::sort(kept.begin(), kept.end());
    kept.erase(std::unique(kept.begin(), kept.end()), kept.end());
    out.push_back({video.trajectory_id, std::move(kept)});
  }
  return out;
}

DtwResult dtw_align(const EmbeddingSequence& reference, const EmbeddingSequence& video) {
  check_sequences({reference, video});
  const std::size_t n = reference.size(), m = video.size(), d = reference.dim();
  const auto sqdist = kernels::active().squared_distance;
  auto cost = [&](std::size_t i, std::size_t j) {
    return std::sqrt(sqdist(reference.vectors.data() + i * d, video.vectors.data() + j * d, d));
  };

  // acc(i, j): cheapest path from (0, 0) ending at (i, j).
  // from: 0 = diagonal, 1 = from (i, j-1), 2 = from (i-1, j).
  Matrix acc(n, m);
  std::vector<unsigned char> from(n * m, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double c = cost(i, j);
      if (i == 0 && j == 0) {
        acc(i, j) = c;
        continue;
      }
      double best = std::numeric_limits<double>::infinity();
      unsigned char arg = 0;
      if (i > 0 && j > 0) {
        best = acc(i - 1, j - 1);
        arg = 0;
      }
      if (j > 0 && acc(i, j - 1) < best) {
        best = acc(i, j - 1);
        arg = 1;
      }
      if (i > 0 && acc(i - 1, j) < best) {
        best = acc(i - 1, j);
        arg = 2;
      }
      acc(i, j) = best + c;
      from[i * m + j] = arg;
    }
  }

  DtwResult r;
  r.cost = acc(n - 1, m - 1);
  std::size_t i = n - 1, j = m - 1;
  r.path.emplace_back(i, j);
  while (i > 0 || j > 0) {
    switch (from[i * m + j]) {
      case 0: --i; --j; break;
      case 1: --j; break;
      default: --i; break;
    }
    r.path.emplace_back(i, j);
  }
  std::reverse(r.path.begin(), r.path.end());
  return r;
}

Selection dtw_selection(const DtwResult& result, const EmbeddingSequence& reference,
                        const EmbeddingSequence& video) {
  const std::size_t d = reference.dim();
  const auto sqdist = kernels::active().squared_distance;
  std::vector<std::size_t> kept;
  std::size_t p = 0;
  while (p < result.path.size()) {
    const std::size_t i = result.path[p].first;
    std::size_t best = result.path[p].second;
    double best_d = std::numeric_limits<double>::infinity();
    for (; p < result.path.size() && result.path[p].first == i; ++p) {
      const std::size_t j = result.path[p].second;
      const double dj = sqdist(reference.vectors.data() + i * d, video.vectors.data() + j * d, d);
      if (dj < best_d) {
        best_d = dj;
        best = j;
      }
    }
    kept.push_back(best);
  }
  kept.erase(std::unique(kept.begin(), kept.end()), kept.end());
  return {video.trajectory_id, std::move(kept)};
}

std::vector<Selection> reference_dtw_filter(const EmbeddingSequence& reference,
                                            const std::vector<EmbeddingSequence>& videos) {
  std::vector<Selection> out;
  for (const auto& v : videos) out.push_back(dtw_selection(dtw_align(reference, v), reference, v));
  return out;
}

Trajectory apply_selection(const Trajectory& trajectory, const Selection& selection) {
  if (selection.trajectory_id != trajectory.id) {
    throw DataError("selection for '" + selection.trajectory_id + "' applied to '" + trajectory.id + "'");
  }
  return select_frames(trajectory, selection.kept);
}

Dataset apply_selections(const Dataset& dataset, const std::vector<Selection>& selections) {
  std::map<std::string, const Selection*> by_id;
  for (const auto& s : selections) by_id[s.trajectory_id] = &s;
  Dataset out = dataset;
  out.trajectories.clear();
  for (const auto& t : dataset.trajectories) {
    const auto it = by_id.find(t.id);
    if (it == by_id.end()) throw DataError("no selection for trajectory '" + t.id + "'");
    out.trajectories.push_back(apply_selection(t, *it->second));
  }
  return out;
}

}  // namespace eil
