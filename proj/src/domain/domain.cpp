#include "eil/domain.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "eil/error.hpp"

namespace eil {

using nlohmann::json;

const Trajectory& Dataset::find(const std::string& id) const {
  for (const auto& t : trajectories) {
    if (t.id == id) return t;
  }
  throw DataError("no trajectory with id '" + id + "'");
}

std::vector<Span> spans_from_flags(const std::vector<bool>& flags) {
  std::vector<Span> spans;
  std::size_t i = 0;
  while (i < flags.size()) {
    if (!flags[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < flags.size() && flags[j]) ++j;
    spans.push_back({i, j});
    i = j;
  }
  return spans;
}

std::vector<bool> flags_from_spans(const std::vector<Span>& spans, std::size_t length) {
  std::vector<bool> flags(length, false);
  for (const auto& s : spans) {
    for (std::size_t i = s.start; i < s.end && i < length; ++i) flags[i] = true;
  }
  return flags;
}

namespace {

[[noreturn]] void invariant(const Trajectory& t, const std::string& what) {
  throw DataError("trajectory '" + t.id + "': " + what);
}

bool all_finite(const std::vector<double>& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace

void validate_trajectory(const Trajectory& t, const Dataset& owner) {
  if (t.frames.empty()) invariant(t, "no frames");
  for (std::size_t i = 0; i < t.frames.size(); ++i) {
    const Frame& f = t.frames[i];
    if (f.observation.size() != owner.d_obs) {
      invariant(t, "frame " + std::to_string(i) + " observation dimension " +
                       std::to_string(f.observation.size()) + " != " + std::to_string(owner.d_obs));
    }
    if (owner.action_kind == ActionKind::continuous) {
      if (f.action.size() != owner.d_act) {
        invariant(t, "frame " + std::to_string(i) + " action dimension " +
                         std::to_string(f.action.size()) + " != " + std::to_string(owner.d_act));
      }
    } else if (f.category < 0 || static_cast<std::size_t>(f.category) >= owner.d_act) {
      invariant(t, "frame " + std::to_string(i) + " action category out of range");
    }
    if (!all_finite(f.observation) || !all_finite(f.action)) {
      invariant(t, "frame " + std::to_string(i) + " has non-finite values");
    }
  }
  if (t.truth.extraneous.size() != t.frames.size()) invariant(t, "missing per-frame labels");

  std::size_t prev_end = 0;
  for (std::size_t k = 0; k < t.truth.spans.size(); ++k) {
    const Span& s = t.truth.spans[k];
    if (s.start >= s.end) invariant(t, "empty or reversed span");
    if (s.end > t.frames.size()) invariant(t, "span out of bounds");
    if (k > 0 && s.start < prev_end) invariant(t, "spans overlap or are unsorted");
    prev_end = s.end;
  }
  if (flags_from_spans(t.truth.spans, t.frames.size()) != t.truth.extraneous) {
    invariant(t, "spans disagree with per-frame labels");
  }
  std::size_t n_ext = 0;
  for (bool b : t.truth.extraneous) n_ext += b ? 1 : 0;
  if (2 * n_ext >= t.frames.size()) invariant(t, "extraneous frames must be < 50% of the trajectory");
}

void validate_dataset(const Dataset& d) {
  if (d.trajectories.size() < 2) throw DataError("a dataset needs at least two trajectories");
  if (d.d_obs == 0 || d.d_act == 0) throw DataError("dataset dimensions must be positive");
  for (const auto& t : d.trajectories) validate_trajectory(t, d);
}

void validate_selection(const Selection& s, std::size_t length) {
  if (s.kept.empty()) throw DataError("selection for '" + s.trajectory_id + "' is empty");
  for (std::size_t i = 0; i < s.kept.size(); ++i) {
    if (s.kept[i] >= length) {
      throw DataError("selection for '" + s.trajectory_id + "' indexes frame " +
                      std::to_string(s.kept[i]) + " of " + std::to_string(length));
    }
    if (i > 0 && s.kept[i] <= s.kept[i - 1]) {
      throw DataError("selection for '" + s.trajectory_id + "' is not strictly increasing");
    }
  }
}

Trajectory select_frames(const Trajectory& t, const std::vector<std::size_t>& kept) {
  validate_selection(Selection{t.id, kept}, t.frames.size());
  Trajectory out;
  out.id = t.id;
  out.truth.goal = t.truth.goal;
  out.frames.reserve(kept.size());
  out.truth.extraneous.reserve(kept.size());
  for (std::size_t i : kept) {
    out.frames.push_back(t.frames[i]);
    out.truth.extraneous.push_back(t.truth.extraneous[i]);
  }
  out.truth.spans = spans_from_flags(out.truth.extraneous);
  return out;
}

// ---------------------------------------------------------------------------
// Line-delimited records

namespace {

std::string_view kind_name(ActionKind k) {
  return k == ActionKind::continuous ? "continuous" : "discrete";
}

json trajectory_record(const Trajectory& t, const Dataset& d) {
  json frames = json::array();
  for (std::size_t i = 0; i < t.frames.size(); ++i) {
    const Frame& f = t.frames[i];
    json jf;
    jf["obs"] = f.observation;
    if (d.action_kind == ActionKind::continuous) {
      jf["act"] = f.action;
    } else {
      jf["act"] = f.category;
    }
    jf["ext"] = static_cast<bool>(t.truth.extraneous[i]);
    frames.push_back(std::move(jf));
  }
  json spans = json::array();
  for (const auto& s : t.truth.spans) spans.push_back({s.start, s.end});

  json rec;
  rec["id"] = t.id;
  rec["env"] = d.env_name;
  rec["action_kind"] = kind_name(d.action_kind);
  rec["d_act"] = d.d_act;
  rec["goal"] = t.truth.goal;
  rec["frames"] = std::move(frames);
  rec["spans"] = std::move(spans);
  return rec;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return in;
}

}  // namespace

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  validate_dataset(dataset);
  std::ostringstream buf;
  for (const auto& t : dataset.trajectories) buf << trajectory_record(t, dataset).dump() << '\n';
  auto out = open_out(path);
  out << buf.str();
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

Dataset load_dataset(const std::filesystem::path& path) {
  auto in = open_in(path);
  Dataset d;
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no) + ": ";
    try {
      const json rec = json::parse(line);
      Trajectory t;
      t.id = rec.at("id").get<std::string>();
      const auto env = rec.at("env").get<std::string>();
      const auto kind_s = rec.at("action_kind").get<std::string>();
      if (kind_s != "continuous" && kind_s != "discrete") {
        throw DataError(where + "unknown action_kind '" + kind_s + "'");
      }
      const ActionKind kind = kind_s == "continuous" ? ActionKind::continuous : ActionKind::discrete;
      const auto d_act = rec.at("d_act").get<std::size_t>();
      t.truth.goal = rec.at("goal").get<std::vector<double>>();
      for (const auto& jf : rec.at("frames")) {
        Frame f;
        f.observation = jf.at("obs").get<std::vector<double>>();
        if (kind == ActionKind::continuous) {
          f.action = jf.at("act").get<std::vector<double>>();
        } else {
          f.category = jf.at("act").get<int>();
        }
        t.truth.extraneous.push_back(jf.at("ext").get<bool>());
        t.frames.push_back(std::move(f));
      }
      for (const auto& js : rec.at("spans")) {
        if (!js.is_array() || js.size() != 2) throw DataError(where + "span must be [start, end]");
        t.truth.spans.push_back({js[0].get<std::size_t>(), js[1].get<std::size_t>()});
      }

      const std::size_t d_obs = t.frames.empty() ? 0 : t.frames.front().observation.size();
      if (first) {
        d.env_name = env;
        d.action_kind = kind;
        d.d_act = d_act;
        d.d_obs = d_obs;
        first = false;
      } else if (env != d.env_name || kind != d.action_kind || d_act != d.d_act) {
        throw DataError(where + "trajectory '" + t.id + "' disagrees with the dataset's env or action space");
      } else if (d_obs != d.d_obs) {
        throw DataError(where + "trajectory '" + t.id + "' dimension mismatch: d_obs " +
                        std::to_string(d_obs) + " != " + std::to_string(d.d_obs));
      }
      validate_trajectory(t, d);
      d.trajectories.push_back(std::move(t));
    } catch (const json::exception& e) {
      throw DataError(where + "parse error: " + e.what());
    }
  }
  validate_dataset(d);
  return d;
}

void save_selections(const std::vector<Selection>& selections, const std::filesystem::path& path) {
  std::ostringstream buf;
  for (const auto& s : selections) {
    json rec;
    rec["trajectory_id"] = s.trajectory_id;
    rec["kept"] = s.kept;
    buf << rec.dump() << '\n';
  }
  auto out = open_out(path);
  out << buf.str();
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

std::vector<Selection> load_selections(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<Selection> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json rec = json::parse(line);
      Selection s;
      s.trajectory_id = rec.at("trajectory_id").get<std::string>();
      s.kept = rec.at("kept").get<std::vector<std::size_t>>();
      out.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": parse error: " + e.what());
    }
  }
  return out;
}

}  // namespace eil
