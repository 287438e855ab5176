#include "eil/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "eil/align.hpp"
#include "eil/bc.hpp"
#include "eil/domain.hpp"
#include "eil/encoder.hpp"
#include "eil/error.hpp"
#include "eil/metrics.hpp"
#include "eil/rng.hpp"
#include "eil/synthgen.hpp"
#include "eil/tcc.hpp"

namespace eil::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Outputs are written to sibling temporaries and renamed once every file of
// a command is complete.
class Staging {
 public:
  fs::path stage(const fs::path& final_path) {
    if (final_path.has_parent_path()) fs::create_directories(final_path.parent_path());
    fs::path tmp = final_path;
    tmp += ".partial";
    files_.emplace_back(tmp, final_path);
    return tmp;
  }
  void commit() {
    for (const auto& [tmp, final_path] : files_) fs::rename(tmp, final_path);
    files_.clear();
  }
  ~Staging() {
    std::error_code ec;
    for (const auto& f : files_) fs::remove(f.first, ec);
  }

 private:
  std::vector<std::pair<fs::path, fs::path>> files_;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw Error("write to '" + path.string() + "' failed");
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

// "3" or "1:2" into an inclusive range.
std::pair<int, int> parse_range(const std::string& text, const char* what) {
  const auto colon = text.find(':');
  try {
    std::size_t used = 0;
    if (colon == std::string::npos) {
      const int v = std::stoi(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
      return {v, v};
    }
    const int lo = std::stoi(text.substr(0, colon), &used);
    if (used != colon) throw std::invalid_argument(text);
    const std::string rest = text.substr(colon + 1);
    const int hi = std::stoi(rest, &used);
    if (used != rest.size()) throw std::invalid_argument(text);
    return {lo, hi};
  } catch (const std::logic_error&) {
    throw UsageError(std::string("bad ") + what + " '" + text + "': expected N or MIN:MAX");
  }
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

struct SeedStats {
  double mean = 0.0;
  double stddev = 0.0;
  double median = 0.0;
};

SeedStats stats(std::vector<double> v) {
  SeedStats s;
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  for (double x : v) s.stddev += (x - s.mean) * (x - s.mean);
  // Population standard deviation over seeds.
  s.stddev = std::sqrt(s.stddev / static_cast<double>(v.size()));
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  s.median = n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  return s;
}

fs::path policy_for_seed(const fs::path& base, std::uint64_t seed) {
  fs::path p = base;
  p += "_s" + std::to_string(seed) + ".json";
  return p;
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
  std::string env = "reach2d";
  std::size_t k = 20;
  double noise_fraction = 0.28;
  std::string spans = "1:2";
  std::string span_len = "3:10";
  std::uint64_t seed = 1;
  std::string out = "run";
};

/// Seed of the perfect dataset written next to an extraneous one.
std::uint64_t perfect_seed(std::uint64_t seed) { return mix_seed(seed, 0x9e7fec7ULL); }

int cmd_generate(const GenerateArgs& a, std::ostream& out) {
  if (a.k < 2) throw UsageError("--k must be at least 2");
  const EnvSpec spec = env_spec_for(a.env);
  NoiseSpec noise;
  std::tie(noise.n_spans_min, noise.n_spans_max) = parse_range(a.spans, "--spans");
  std::tie(noise.span_len_min, noise.span_len_max) = parse_range(a.span_len, "--span-len");
  noise.target_extraneous_fraction = a.noise_fraction;
  noise.validate();

  const Dataset extraneous = generate_extraneous(spec, noise, a.k, a.seed);
  const Dataset perfect = generate_perfect(spec, a.k, perfect_seed(a.seed));

  Staging staging;
  const fs::path dir(a.out);
  save_dataset(perfect, staging.stage(dir / "perfect.jsonl"));
  save_dataset(extraneous, staging.stage(dir / "extraneous.jsonl"));
  staging.commit();

  std::vector<Selection> everything;
  for (const auto& t : extraneous.trajectories) {
    Selection s{t.id, std::vector<std::size_t>(t.size())};
    for (std::size_t i = 0; i < t.size(); ++i) s.kept[i] = i;
    everything.push_back(std::move(s));
  }
  const FilterRow row = filter_report(extraneous, everything).original;
  out << "generated " << a.k << " " << a.env << " trajectories, extraneous " << row.extraneous_kept << "/"
      << row.total_kept << " frames = " << format_percent(row.fraction()) << "\n";
  return ok;
}

// ----------------------------------------------------------- train-encoder

struct TrainArgs {
  std::string data;
  std::string out = "run/encoder.json";
  TrainConfig cfg;
  std::uint64_t init_seed = 0;  // 0 reuses --seed
};

int cmd_train(TrainArgs a, std::ostream& out) {
  const Dataset data = load_dataset(a.data);
  EncoderParams init = init_params(EncoderArch::for_dataset(data), a.init_seed ? a.init_seed : a.cfg.seed);
  fit_input_normalization(init, data);
  const TrainResult r = train(data, init, a.cfg);

  Staging staging;
  const fs::path path(a.out);
  fs::path log = path;
  log.replace_filename(path.stem().string() + "_log.tsv");
  save_encoder(r.params, staging.stage(path));
  save_train_log(r.log, staging.stage(log));
  staging.commit();

  out << "trained encoder for " << a.cfg.n_steps << " steps; held-out cycle consistency "
      << fixed(r.initial_heldout_rate, 3) << " -> " << fixed(r.final_heldout_rate, 3) << "\n";
  return ok;
}

// ------------------------------------------------------------------- align

struct AlignArgs {
  std::string data;
  std::string encoder;
  std::string method = "uva";
  std::string reference;
  std::string reference_data;  // default: perfect.jsonl beside --data
  bool keep_voting_frames = false;
  std::string out;
};

fs::path default_reference_data(const fs::path& data) { return data.parent_path() / "perfect.jsonl"; }

int cmd_align(const AlignArgs& a, std::ostream& out) {
  if (a.method != "uva" && a.method != "nn" && a.method != "dtw") {
    throw UsageError("--method must be uva, nn or dtw");
  }
  const Dataset data = load_dataset(a.data);
  const EncoderParams params = load_encoder(a.encoder);
  const auto seqs = encode_dataset(params, data);

  std::vector<Selection> sel;
  if (a.method == "uva") {
    sel = uva(seqs, UvaOptions{a.keep_voting_frames});
  } else {
    const fs::path ref_path = a.reference_data.empty() ? default_reference_data(a.data) : fs::path(a.reference_data);
    const Dataset ref_data = load_dataset(ref_path);
    if (ref_data.d_obs != data.d_obs || ref_data.d_act != data.d_act) {
      throw DataError("reference dataset dimensions do not match --data");
    }
    const Trajectory& ref_traj = a.reference.empty() ? ref_data.trajectories.front() : ref_data.find(a.reference);
    const EmbeddingSequence ref = encode_sequence(params, ref_traj);
    sel = a.method == "nn" ? reference_nn_filter(ref, seqs) : reference_dtw_filter(ref, seqs);
  }

  const fs::path path = a.out.empty() ? fs::path(a.data).parent_path() / ("selections_" + a.method + ".jsonl")
                                      : fs::path(a.out);
  Staging staging;
  save_selections(sel, staging.stage(path));
  staging.commit();

  const FilterReport rep = filter_report(data, sel, a.method);
  out << filter_table({rep.original, rep.filtered});
  return ok;
}

// ---------------------------------------------------------------------- bc

struct BcArgs {
  std::string data;
  std::string selections;
  std::vector<std::uint64_t> seeds{1};
  BcConfig cfg;
  std::string out = "run/policy";
};

int cmd_bc(const BcArgs& a, std::ostream& out) {
  Dataset data = load_dataset(a.data);
  if (!a.selections.empty()) data = apply_selections(data, load_selections(a.selections));
  std::size_t frames = 0;
  for (const auto& t : data.trajectories) frames += t.size();

  Staging staging;
  std::ostringstream lines;
  for (std::uint64_t seed : a.seeds) {
    BcConfig cfg = a.cfg;
    cfg.seed = seed;
    const BcResult r = train_bc(data, cfg);
    const fs::path path = policy_for_seed(a.out, seed);
    save_policy(r.policy, staging.stage(path));
    lines << "seed " << seed << ": " << frames << " frames, loss "
          << (r.loss_curve.empty() ? std::string("n/a")
                                   : fixed(r.loss_curve.front(), 4) + " -> " + fixed(r.loss_curve.back(), 4))
          << " -> " << path.string() << "\n";
  }
  staging.commit();
  out << lines.str();
  return ok;
}

// ---------------------------------------------------------------- evaluate

struct EvalArgs {
  std::string policy = "run/policy";
  std::string env = "reach2d";
  std::size_t trials = 50;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  bool expert = false;
  std::string out = "run/eval";
};

int cmd_evaluate(const EvalArgs& a, unsigned threads, std::ostream& out) {
  const EnvSpec spec = env_spec_for(a.env);
  json summary{{"env", a.env}, {"trials", a.trials}, {"seeds", json::array()}};
  std::vector<double> rates, dists;
  Staging staging;

  for (std::uint64_t seed : a.seeds) {
    std::optional<Policy> policy;
    Controller controller;
    if (a.expert) {
      controller = expert_controller();
    } else {
      const fs::path per_seed = policy_for_seed(a.policy, seed);
      policy = load_policy(fs::exists(per_seed) ? per_seed : fs::path(a.policy));
      if (policy->d_obs != observation_dim(spec)) throw DataError("policy observation size does not match --env");
      controller = as_controller(*policy);
    }
    const EvalReport r = evaluate(controller, spec, a.trials, seed, threads);
    fs::path table = a.out;
    table += "_s" + std::to_string(seed) + ".tsv";
    save_eval_table(r, staging.stage(table));
    summary["seeds"].push_back(
        {{"seed", seed}, {"success_rate", r.success_rate}, {"mean_min_distance", r.mean_min_distance}});
    rates.push_back(r.success_rate);
    dists.push_back(r.mean_min_distance);
  }
  const SeedStats sr = stats(rates), sd = stats(dists);
  summary["success_rate"] = {{"mean", sr.mean}, {"std", sr.stddev}, {"median", sr.median}};
  summary["mean_min_distance"] = {{"mean", sd.mean}, {"std", sd.stddev}, {"median", sd.median}};
  fs::path sum = a.out;
  sum += ".json";
  write_text(staging.stage(sum), summary.dump(2) + "\n");
  staging.commit();

  out << "success rate " << fixed(100 * sr.mean, 1) << "% +- " << fixed(100 * sr.stddev, 1) << " (median "
      << fixed(100 * sr.median, 1) << "%), min distance " << fixed(sd.mean, 4) << " +- " << fixed(sd.stddev, 4)
      << " over " << a.seeds.size() << " seeds x " << a.trials << " trials\n";
  return ok;
}

// ------------------------------------------------------------------ report

struct ReportArgs {
  std::string run_dir = "run";
};

// Kept-extraneous / kept-total counted directly from labels, independent of
// filter_report.
void cross_check(const Dataset& data, const std::vector<Selection>& sel, const FilterRow& row) {
  std::size_t ext = 0, total = 0;
  for (const auto& s : sel) {
    const Trajectory& t = data.find(s.trajectory_id);
    for (std::size_t i : s.kept) {
      ++total;
      ext += t.truth.extraneous.at(i) ? 1 : 0;
    }
  }
  if (ext != row.extraneous_kept || total != row.total_kept) {
    throw DataError("report arithmetic mismatch for " + row.label);
  }
}

int cmd_report(const ReportArgs& a, std::ostream& out) {
  const fs::path dir(a.run_dir);
  const std::vector<std::string> required = {"extraneous.jsonl", "selections_uva.jsonl", "eval_raw.json",
                                             "eval_uva.json"};
  std::vector<std::string> missing;
  for (const auto& f : required)
    if (!fs::exists(dir / f)) missing.push_back(f);
  if (!missing.empty()) {
    std::string msg = "run directory '" + dir.string() + "' is missing:";
    for (const auto& m : missing) msg += " " + m;
    throw DataError(msg);
  }

  const Dataset data = load_dataset(dir / "extraneous.jsonl");
  Staging staging;
  std::ostringstream text;
  json records = json::array();

  // Filtering tables: UVA alone, then every available filter.
  std::vector<FilterRow> rows;
  FilterRow original;
  for (const std::string method : {"uva", "nn", "dtw"}) {
    const fs::path p = dir / ("selections_" + method + ".jsonl");
    if (!fs::exists(p)) continue;
    const auto sel = load_selections(p);
    const FilterReport rep = filter_report(data, sel, method);
    cross_check(data, sel, rep.filtered);
    original = rep.original;
    rows.push_back(rep.filtered);
    save_alignment_curve(data, sel, staging.stage(dir / ("alignment_curve_" + method + ".tsv")));
  }
  text << "Extraneous content before and after filtering\n"
       << filter_table({original, rows.front()}) << "\n";
  std::vector<FilterRow> all{original};
  all.insert(all.end(), rows.begin(), rows.end());
  text << "Filter comparison\n" << filter_table(all) << "\n";
  save_filter_rows(all, staging.stage(dir / "filter_report.jsonl"));

  // Policy tables.
  std::vector<std::vector<std::string>> success, distance;
  for (const std::string tag : {"raw", "uva"}) {
    const json e = read_json(dir / ("eval_" + tag + ".json"));
    try {
      std::vector<std::string> s{tag}, d{tag};
      std::string per_s, per_d;
      for (const auto& seed : e.at("seeds")) {
        if (!per_s.empty()) per_s += " ", per_d += " ";
        per_s += fixed(100 * seed.at("success_rate").get<double>(), 1);
        per_d += fixed(seed.at("mean_min_distance").get<double>(), 4);
      }
      const auto& sr = e.at("success_rate");
      const auto& md = e.at("mean_min_distance");
      s.push_back(per_s);
      s.push_back(fixed(100 * sr.at("mean").get<double>(), 1) + " +- " + fixed(100 * sr.at("std").get<double>(), 1));
      s.push_back(fixed(100 * sr.at("median").get<double>(), 1));
      d.push_back(per_d);
      d.push_back(fixed(md.at("mean").get<double>(), 4) + " +- " + fixed(md.at("std").get<double>(), 4));
      d.push_back(fixed(md.at("median").get<double>(), 4));
      success.push_back(s);
      distance.push_back(d);
      records.push_back({{"table", "policy"},
                         {"data", tag},
                         {"success_rate", sr},
                         {"mean_min_distance", md}});
    } catch (const json::exception& ex) {
      throw DataError((dir / ("eval_" + tag + ".json")).string() + ": " + ex.what());
    }
  }
  text << "Success rate (%)\n" << text_table({"training data", "per seed", "mean +- std", "median"}, success) << "\n";
  text << "Minimum distance to goal\n"
       << text_table({"training data", "per seed", "mean +- std", "median"}, distance);

  for (const auto& r : all) {
    records.push_back({{"table", "filter"},
                       {"method", r.label},
                       {"extraneous_kept", r.extraneous_kept},
                       {"total_kept", r.total_kept},
                       {"extraneous_fraction", r.fraction()}});
  }
  std::string jsonl;
  for (const auto& r : records) jsonl += r.dump() + "\n";
  write_text(staging.stage(dir / "report.txt"), text.str());
  write_text(staging.stage(dir / "report.jsonl"), jsonl);
  staging.commit();
  out << text.str();
  return ok;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Extraneousness-aware imitation learning toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Key-value run configuration; command-line flags take precedence");
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  app.add_option("--threads", threads, "Worker threads for parallel stages")->check(CLI::PositiveNumber);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Generate perfect and extraneous demonstration datasets");
  g->add_option("--env", gen.env, "reach2d or push2d")->capture_default_str();
  g->add_option("--k", gen.k, "Trajectories per dataset")->capture_default_str();
  g->add_option("--noise-fraction", gen.noise_fraction, "Target extraneous fraction per trajectory")
      ->capture_default_str();
  g->add_option("--spans", gen.spans, "Detours per trajectory, N or MIN:MAX")->capture_default_str();
  g->add_option("--span-len", gen.span_len, "Outbound detour steps, N or MIN:MAX")->capture_default_str();
  g->add_option("--seed", gen.seed)->capture_default_str();
  g->add_option("--out", gen.out, "Output directory")->capture_default_str();

  TrainArgs tr;
  std::string sampling = "random";
  auto* t = app.add_subcommand("train-encoder", "Train the frame encoder with the cycle-consistency loss");
  t->add_option("--data", tr.data, "Dataset file")->required();
  t->add_option("--lambda", tr.cfg.loss.lambda)->capture_default_str();
  t->add_option("--variance-exponent", tr.cfg.loss.variance_exponent, "1 or 2")->capture_default_str();
  t->add_option("--steps", tr.cfg.n_steps)->capture_default_str();
  t->add_option("--lr", tr.cfg.learning_rate)->capture_default_str();
  t->add_option("--momentum", tr.cfg.momentum)->capture_default_str();
  t->add_option("--pairs-per-step", tr.cfg.pairs_per_step)->capture_default_str();
  t->add_option("--frames-per-step", tr.cfg.frames_per_step, "Anchors per pair; 0 = all")->capture_default_str();
  t->add_option("--pair-sampling", sampling, "random or all")->capture_default_str();
  t->add_option("--final-lr-ratio", tr.cfg.final_lr_ratio, "Cosine decay target as a fraction of --lr; 1 = constant")
      ->capture_default_str();
  t->add_option("--max-grad-norm", tr.cfg.max_grad_norm, "0 disables clipping")->capture_default_str();
  t->add_option("--seed", tr.cfg.seed)->capture_default_str();
  t->add_option("--init-seed", tr.init_seed, "Parameter init seed; 0 uses --seed")->capture_default_str();
  t->add_option("--out", tr.out, "Checkpoint path; the log is written beside it")->capture_default_str();

  AlignArgs al;
  auto* a = app.add_subcommand("align", "Filter a dataset with UVA or a reference-based baseline");
  a->add_option("--data", al.data)->required();
  a->add_option("--encoder", al.encoder)->required();
  a->add_option("--method", al.method, "uva, nn or dtw")->capture_default_str();
  a->add_option("--reference", al.reference, "Reference trajectory id (nn, dtw); default the first one");
  a->add_option("--reference-data", al.reference_data, "Dataset holding the reference; default perfect.jsonl");
  a->add_flag("--keep-voting-frames", al.keep_voting_frames, "Also emit UVA Voting-stage frames");
  a->add_option("--out", al.out, "Selections file; default selections_<method>.jsonl beside --data");

  BcArgs bc;
  auto* b = app.add_subcommand("bc", "Behavior cloning on raw or filtered demonstrations");
  b->add_option("--data", bc.data)->required();
  b->add_option("--selections", bc.selections, "Selections file to apply first");
  b->add_option("--seed,--seeds", bc.seeds, "One policy per seed")->delimiter(',')->capture_default_str();
  b->add_option("--steps", bc.cfg.n_steps)->capture_default_str();
  b->add_option("--lr", bc.cfg.learning_rate)->capture_default_str();
  b->add_option("--momentum", bc.cfg.momentum)->capture_default_str();
  b->add_option("--batch", bc.cfg.batch_size, "Minibatch size; 0 = full batch")->capture_default_str();
  b->add_option("--hidden", bc.cfg.hidden)->capture_default_str();
  b->add_option("--out", bc.out, "Checkpoint prefix; writes <out>_s<seed>.json")->capture_default_str();

  EvalArgs ev;
  auto* e = app.add_subcommand("evaluate", "Closed-loop evaluation of a policy");
  e->add_option("--policy", ev.policy, "Checkpoint, or prefix of per-seed checkpoints")->capture_default_str();
  e->add_flag("--expert", ev.expert, "Evaluate the scripted expert instead of a policy");
  e->add_option("--env", ev.env)->capture_default_str();
  e->add_option("--trials", ev.trials)->capture_default_str();
  e->add_option("--seed,--seeds", ev.seeds)->delimiter(',')->capture_default_str();
  e->add_option("--out", ev.out, "Output prefix")->capture_default_str();

  ReportArgs rp;
  auto* r = app.add_subcommand("report", "Consolidated tables for a run directory");
  r->add_option("--run-dir", rp.run_dir)->capture_default_str();

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::Success& s) {
    out << app.help();
    return ok;
  } catch (const CLI::ParseError& pe) {
    err << "error: " << pe.what() << "\n";
    return usage;
  }

  try {
    if (*g) return cmd_generate(gen, out);
    if (*t) {
      if (sampling == "random") tr.cfg.pair_sampling = PairSampling::random_pairs;
      else if (sampling == "all") tr.cfg.pair_sampling = PairSampling::all_ordered_pairs;
      else throw UsageError("--pair-sampling must be random or all");
      return cmd_train(tr, out);
    }
    if (*a) return cmd_align(al, out);
    if (*b) return cmd_bc(bc, out);
    if (*e) return cmd_evaluate(ev, threads, out);
    if (*r) return cmd_report(rp, out);
  } catch (const UsageError& ex) {
    err << "error: " << ex.what() << "\n";
    return usage;
  } catch (const NumericalError& ex) {
    err << "numerical failure: " << ex.what() << "\n";
    return numerical;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return data;
  }
  return usage;
}

}  // namespace eil::cli
