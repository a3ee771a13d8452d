#include "surfkin/cli/app.hpp"

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "surfkin/cli/config.hpp"
#include "surfkin/geometry/mesh.hpp"
#include "surfkin/ik/audit.hpp"
#include "surfkin/io/atomic_file.hpp"

namespace surfkin::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Paths {
  fs::path root;
  fs::path dataset() const { return root / "dataset"; }
  fs::path manifest() const { return dataset() / "manifest.json"; }
  fs::path fk() const { return root / "fk.json"; }
  fs::path frames() const { return root / "frames.jsonl"; }
  fs::path s2r() const { return root / "s2r.json"; }
  fs::path baseline() const { return root / "baseline.json"; }
};

void require(const fs::path& p, const std::string& what) {
  if (!fs::exists(p)) throw MissingPrerequisite(what + " (" + p.string() + ")");
}

std::vector<double> parse_list(const std::string& text, std::size_t expected, const char* what) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw InputError(std::string(what) + ": cannot parse '" + item + "'");
    }
  }
  if (v.size() != expected) throw InputError(std::string(what) + ": expected " + std::to_string(expected) + " values");
  return v;
}

oracle::Actuation parse_actuation(const std::string& text, const char* what) {
  const auto v = parse_list(text, oracle::kChambers, what);
  oracle::Actuation a{};
  std::copy(v.begin(), v.end(), a.begin());
  oracle::validate_actuation(a);
  return a;
}

json vec_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

json pose_json(const geometry::RigidTransform& t) {
  json rot = json::array();
  for (int i = 0; i < 3; ++i) rot.push_back({t.rotation()(i, 0), t.rotation()(i, 1), t.rotation()(i, 2)});
  return {{"rotation", rot}, {"translation", vec_json(t.translation())}};
}

class Runner {
 public:
  Runner(json cfg, fs::path root, std::ostream& out) : cfg_(std::move(cfg)), paths_{std::move(root)}, out_(out) {
    out_ << std::setprecision(6);
  }

  void gen_dataset() {
    const auto opt = dataset_options(cfg_);
    const oracle::VirtualMannequin vm(mannequin_config(cfg_));
    const auto ds = fk::build_dataset(vm, opt);
    const auto manifest = fk::write_dataset(ds, paths_.dataset(), {{"seed", seed(cfg_)}, {"options", cfg_.at("dataset")}});
    double rms = 0.0;
    double mx = 0.0;
    for (int k = 0; k < ds.size(); ++k) {
      rms += ds.fit_rms[static_cast<std::size_t>(k)];
      mx = std::max(mx, ds.fit_max[static_cast<std::size_t>(k)]);
    }
    out_ << "samples " << ds.size() << " train " << ds.train.size() << " test " << ds.test.size() << '\n'
         << "fit_rms_mean_mm " << rms / ds.size() << " fit_max_mm " << mx << '\n'
         << "manifest " << manifest.string() << '\n';
  }

  void capture(std::optional<int> frames_override, const std::optional<fs::path>& output) {
    const json& c = cfg_.at("capture");
    const int frames = frames_override.value_or(c.at("frames").get<int>());
    if (frames < 1) throw InputError("capture: frame count must be >= 1");
    const oracle::VirtualMannequin vm(mannequin_config(cfg_));
    const oracle::RealityGap gap(gap_config(cfg_));
    const auto uvs = oracle::canonical_marker_uvs(c.at("markers").get<int>());
    const auto cc = capture_config(cfg_);
    const auto acts = oracle::random_actuations(frames, c.at("actuation_seed").get<std::uint64_t>());
    std::vector<oracle::MarkerFrame> out;
    const std::uint64_t base = seed(cfg_) << 32;
    for (int k = 0; k < frames; ++k) out.push_back(oracle::capture_frame(vm, gap, acts[static_cast<std::size_t>(k)], uvs, cc, base + static_cast<std::uint64_t>(k)));
    const fs::path path = output.value_or(paths_.frames());
    io::write_file_atomic(path, oracle::to_jsonl(out));
    const auto s = oracle::summarize(out);
    out_ << "frames " << s.frames << " complete " << s.complete << " incomplete " << s.incomplete << " observed "
         << s.observed << '\n'
         << "wrote " << path.string() << '\n';
  }

  void train(const std::string& stage) {
    if (stage == "fk") return train_fk();
    if (stage == "s2r") return train_s2r();
    return train_baseline();
  }

  void eval() {
    require(paths_.fk(), "fk checkpoint; run 'train fk'");
    const auto fkm = load_fk();
    const oracle::VirtualMannequin vm(mannequin_config(cfg_));
    const oracle::RealityGap gap(gap_config(cfg_));
    json report = json::object();
    if (fs::exists(paths_.manifest())) {
      const auto ds = fk::read_dataset(paths_.dataset());
      const auto test = fk::select(ds.actuations, ds.test);
      const auto m = fk::evaluate_fk(fkm, vm, test);
      const auto base = fk::evaluate_mean_predictor(ds, vm, test);
      report["fk"] = {{"test_samples", test.size()}, {"mean", m.mean}, {"max", m.max}, {"mean_predictor_mean", base.mean}};
      out_ << "fk test mean_mm " << m.mean << " max_mm " << m.max << " (mean predictor " << base.mean << ")\n";
    }
    const json& e = cfg_.at("eval");
    const auto probes = oracle::random_actuations(e.at("probes").get<int>(), e.at("probe_seed").get<std::uint64_t>());
    auto emit = [&](const char* name, const sim2real::CalibrationReport& r) {
      const double reduction = r.mean_sim > 0.0 ? 1.0 - r.mean_fixed / r.mean_sim : 0.0;
      report[name] = {{"mean_sim", r.mean_sim}, {"mean_fixed", r.mean_fixed}, {"improved", r.improved},
                      {"probes", r.rows.size()}, {"reduction", reduction}};
      io::write_file_atomic(paths_.root / (std::string("eval_") + name + ".csv"), sim2real::to_csv(r));
      out_ << name << " mean_sim_mm " << r.mean_sim << " mean_fixed_mm " << r.mean_fixed << " reduction "
           << reduction << " improved " << r.improved << '/' << r.rows.size() << '\n';
    };
    if (fs::exists(paths_.s2r())) emit("s2r", sim2real::eval_calibration(load_s2r(), fkm, vm, gap, probes));
    if (fs::exists(paths_.baseline())) emit("baseline", sim2real::eval_calibration(load_baseline(), fkm, vm, gap, probes));
    io::write_json_atomic(paths_.root / "eval.json", report);
  }

  void make_target(const std::optional<std::string>& actuation) {
    const auto fkm = load_fk_required();
    const auto s2r = load_s2r_required();
    const ik::Models models{fkm, s2r};
    const json& t = cfg_.at("target");
    ik::SyntheticTarget target;
    if (actuation) {
      target.truth = parse_actuation(*actuation, "--actuation");
      const int grid = t.at("grid").get<int>();
      target.mesh = ik::calibrated_mesh(models, target.truth, grid, grid);
    } else {
      target = ik::make_target(models, t.at("seed").get<std::uint64_t>(), t.at("lo").get<double>(),
                               t.at("hi").get<double>(), t.at("max_angle").get<double>(),
                               t.at("max_shift").get<double>(), t.at("grid").get<int>());
    }
    const fs::path obj = paths_.root / "target.obj";
    io::write_file_atomic(obj, geometry::to_obj_string(target.mesh));
    json meta = pose_json(target.pose);
    meta["truth"] = std::vector<double>(target.truth.begin(), target.truth.end());
    io::write_json_atomic(paths_.root / "target.json", meta);
    out_ << "wrote " << obj.string() << '\n';
  }

  void solve(const fs::path& target_path, const std::optional<std::string>& a0_text) {
    const auto fkm = load_fk_required();
    const auto s2r = load_s2r_required();
    geometry::TriangleMesh mesh;
    try {
      mesh = geometry::read_obj(target_path);
    } catch (const Error& e) {
      throw InputError(std::string("target mesh: ") + e.what());
    }
    if (mesh.empty()) throw InputError("target mesh: no triangles");
    oracle::Actuation a0{};
    a0.fill(0.5);
    if (a0_text) a0 = parse_actuation(*a0_text, "--a0");
    const geometry::MeshQuery query(std::move(mesh));
    const auto r = ik::solve_ik({fkm, s2r}, query, a0, ik_config(cfg_));
    io::write_json_atomic(paths_.root / "ik_result.json", ik::to_json(r));
    io::write_file_atomic(paths_.root / "ik_trace.csv", ik::trace_csv(r));
    out_ << "converged " << (r.converged ? "true" : "false") << " (" << ik::to_string(r.termination) << ")"
         << " iterations " << r.iterations << " rounds " << r.rounds << '\n'
         << "final mean_err_mm " << r.mean_error << " max_err_mm " << r.max_error << '\n'
         << "wall_time_ms " << r.wall_time_ms << '\n';
  }

  void audit(const std::string& kind) {
    if (kind == "gradcheck") return audit_gradcheck();
    if (kind == "gradcost") return audit_gradcost();
    return audit_ablation();
  }

 private:
  fk::FkModel load_fk() const { return fk::fk_model_from_json(io::read_json(paths_.fk())); }
  sim2real::S2rModel load_s2r() const { return sim2real::s2r_model_from_json(io::read_json(paths_.s2r())); }
  sim2real::MkBaselineModel load_baseline() const {
    return sim2real::mk_model_from_json(io::read_json(paths_.baseline()));
  }
  fk::FkModel load_fk_required() const {
    require(paths_.fk(), "fk checkpoint; run 'train fk'");
    return load_fk();
  }
  sim2real::S2rModel load_s2r_required() const {
    require(paths_.s2r(), "s2r checkpoint; run 'train s2r'");
    return load_s2r();
  }
  std::vector<oracle::MarkerFrame> load_frames() const {
    require(paths_.frames(), "captured frames; run 'capture'");
    return oracle::frames_from_jsonl(io::read_file(paths_.frames()));
  }
  std::vector<Vec2> marker_uvs() const { return oracle::canonical_marker_uvs(cfg_.at("capture").at("markers").get<int>()); }

  void save_checkpoint(const fs::path& path, const json& model, const std::vector<nn::EpochRecord>& history) {
    io::write_json_atomic(path, model);
    fs::path csv = path;
    csv.replace_filename(path.stem().string() + "_history.csv");
    io::write_file_atomic(csv, history_csv(history));
    out_ << "epochs " << history.size() << " final_train_loss " << (history.empty() ? 0.0 : history.back().train_loss)
         << '\n'
         << "wrote " << path.string() << " and " << csv.string() << '\n';
  }

  void train_fk() {
    require(paths_.manifest(), "dataset; run 'gen-dataset'");
    const auto ds = fk::read_dataset(paths_.dataset());
    const auto opt = fk_options(cfg_);
    fk::FkTrainResult r = opt.target == fk::FkTarget::Vertices
                              ? fk::train_vertex_fk(ds, oracle::VirtualMannequin(mannequin_config(cfg_)), opt)
                              : fk::train_fk(ds, opt);
    save_checkpoint(paths_.fk(), fk::to_json(r.model), r.history);
  }

  std::vector<sim2real::TrainingFrame> training_frames(const fk::FkModel& fkm, bool complete_only) const {
    auto frames = load_frames();
    if (complete_only) {
      std::erase_if(frames, [](const oracle::MarkerFrame& f) { return !f.complete(); });
    }
    return sim2real::pair_with_fk(frames, fkm);
  }

  void train_s2r() {
    const auto fkm = load_fk_required();
    const auto tf = training_frames(fkm, cfg_.at("s2r").at("complete_only").get<bool>());
    auto r = sim2real::train_rbf_net(tf, fkm, marker_uvs(), s2r_options(cfg_));
    for (const auto& w : r.warnings) out_ << "warning: " << w << '\n';
    out_ << "frames " << r.frames_used << " observations " << r.observations_used << '\n';
    save_checkpoint(paths_.s2r(), sim2real::to_json(r.model), r.history);
  }

  void train_baseline() {
    const auto fkm = load_fk_required();
    const auto r = sim2real::train_marker_baseline(training_frames(fkm, false), marker_uvs(), baseline_options(cfg_));
    out_ << "frames " << r.frames_used << '\n';
    save_checkpoint(paths_.baseline(), sim2real::to_json(r.model), r.history);
  }

  void finish_audit(const std::string& name, json report, const std::vector<std::string>& failures) {
    report["failures"] = failures;
    report["passed"] = failures.empty();
    const fs::path path = paths_.root / ("audit_" + name + ".json");
    io::write_json_atomic(path, report);
    out_ << "wrote " << path.string() << '\n';
    if (!failures.empty()) {
      std::string msg = name + " audit failed:";
      for (const auto& f : failures) msg += "\n  " + f;
      throw AuditFailure(msg);
    }
  }

  void audit_gradcheck() {
    const auto fkm = load_fk_required();
    const auto s2r = load_s2r_required();
    const json& a = cfg_.at("audit");
    const auto rep = ik::gradient_check({fkm, s2r}, a.at("gradcheck_probes").get<int>(), seed(cfg_),
                                        a.at("gradcheck_samples").get<int>(), 1e-5,
                                        a.at("gradcheck_tolerance").get<double>());
    static const char* names[3] = {"query", "centers", "coeffs"};
    out_ << "probes " << rep.probes.size() << " skipped " << rep.skipped << " max_rel_err " << rep.max_rel_err << '\n';
    std::vector<std::string> failures;
    if (!rep.passed()) failures.push_back("gradient rel. err " + std::to_string(rep.max_rel_err) + " >= tolerance");
    for (int b = 0; b < 3; ++b) {
      out_ << "drop " << names[b] << " median_rel_err " << rep.ablated_median[b] << " break_fraction "
           << rep.ablated_break_fraction[b] << '\n';
      if (rep.ablated_break_fraction[b] <= 0.5) failures.push_back(std::string("branch '") + names[b] + "' not load-bearing");
    }
    finish_audit("gradcheck", ik::to_json(rep), failures);
  }

  void audit_gradcost() {
    const auto fkm = load_fk_required();
    const auto s2r = load_s2r_required();
    const json& a = cfg_.at("audit");
    const auto rep = ik::gradient_cost_audit({fkm, s2r}, a.at("gradcost_trials").get<int>(), seed(cfg_),
                                             ik_config(cfg_).sample_count);
    const double min_ratio = a.at("gradcost_min_ratio").get<double>();
    out_ << "analytic_ms " << rep.analytic_ms << " fd_ms " << rep.fd_ms << " ratio " << rep.ratio
         << " fd_evaluations " << rep.fd_evaluations << '\n';
    std::vector<std::string> failures;
    if (rep.fd_evaluations != oracle::kChambers + 1) failures.push_back("finite differences used " + std::to_string(rep.fd_evaluations) + " evaluations");
    if (!(rep.ratio >= min_ratio)) failures.push_back("cost ratio " + std::to_string(rep.ratio) + " < " + std::to_string(min_ratio));
    finish_audit("gradcost", ik::to_json(rep), failures);
  }

  void audit_ablation() {
    require(paths_.manifest(), "dataset; run 'gen-dataset'");
    const auto fkm = load_fk_required();
    const auto s2r = load_s2r_required();
    const oracle::VirtualMannequin vm(mannequin_config(cfg_));
    const oracle::RealityGap gap(gap_config(cfg_));
    const auto ds = fk::read_dataset(paths_.dataset());
    const auto test = fk::select(ds.actuations, ds.test);
    const int epochs = cfg_.at("audit").at("ablation_epochs").get<int>();

    json rows = json::array();
    std::ostringstream csv;
    csv << std::setprecision(17) << "study,variant,mean_err,max_err\n";
    auto row = [&](const char* study, const std::string& variant, double mean, double max) {
      rows.push_back({{"study", study}, {"variant", variant}, {"mean_err", mean}, {"max_err", max}});
      csv << study << ',' << variant << ',' << mean << ',' << max << '\n';
      out_ << study << ' ' << variant << " mean_mm " << mean << " max_mm " << max << '\n';
    };

    auto fk_opt = fk_options(cfg_);
    fk_opt.train.max_epochs = epochs;
    std::map<std::string, fk::FkMetrics> fkm_rows;
    fkm_rows["checkpoint"] = fk::evaluate_fk(fkm, vm, test);
    for (auto target : {fk::FkTarget::Delta, fk::FkTarget::Absolute, fk::FkTarget::Vertices}) {
      fk_opt.target = target;
      const auto r = target == fk::FkTarget::Vertices ? fk::train_vertex_fk(ds, vm, fk_opt) : fk::train_fk(ds, fk_opt);
      fkm_rows[fk::to_string(target)] = fk::evaluate_fk(r.model, vm, test);
    }
    for (const auto& [name, m] : fkm_rows) row("fk", name, m.mean, m.max);

    const json& e = cfg_.at("eval");
    const auto probes = oracle::random_actuations(e.at("probes").get<int>(), e.at("probe_seed").get<std::uint64_t>());
    const auto all = sim2real::eval_calibration(s2r, fkm, vm, gap, probes);
    auto s2r_opt = s2r_options(cfg_);
    const auto complete = sim2real::eval_calibration(
        sim2real::train_rbf_net(training_frames(fkm, true), fkm, marker_uvs(), s2r_opt).model, fkm, vm, gap, probes);
    const auto mk = sim2real::eval_calibration(
        sim2real::train_marker_baseline(training_frames(fkm, false), marker_uvs(), baseline_options(cfg_)).model, fkm,
        vm, gap, probes);
    row("s2r", "uncalibrated", all.mean_sim, 0.0);
    row("s2r", "all_frames", all.mean_fixed, 0.0);
    row("s2r", "complete_frames", complete.mean_fixed, 0.0);
    row("s2r", "marker_baseline", mk.mean_fixed, 0.0);
    io::write_file_atomic(paths_.root / "audit_ablation.csv", csv.str());

    std::vector<std::string> failures;
    if (!(fkm_rows["delta"].mean < fkm_rows["absolute"].mean)) failures.push_back("delta targets do not beat absolute targets");
    if (!(all.mean_fixed <= complete.mean_fixed)) failures.push_back("all-frames model worse than complete-frames model");
    if (!(all.mean_fixed <= mk.mean_fixed)) failures.push_back("function prediction worse than marker baseline");
    finish_audit("ablation", {{"rows", rows}}, failures);
  }

  json cfg_;
  Paths paths_;
  std::ostream& out_;
};

fs::path default_root() {
  const char* env = std::getenv(kOutEnv);
  return env && *env ? fs::path(env) : fs::path("surfkin_out");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Neural kinematics pipeline for deformable free-form surfaces", "surfkin"};
  app.require_subcommand(1);
  app.fallthrough();
  std::optional<std::string> config_path;
  std::vector<std::string> overrides;
  std::optional<std::string> out_dir;
  app.add_option("--config", config_path, "JSON config merged over the built-in defaults");
  app.add_option("--set", overrides, "Override a config entry, key.path=value (repeatable)");
  app.add_option("--out", out_dir, std::string("Output directory (default: $") + kOutEnv + " or ./surfkin_out)");

  auto* gen = app.add_subcommand("gen-dataset", "Sample the oracle and fit the FK dataset");
  std::optional<int> frames;
  std::optional<std::string> frames_out;
  auto* cap = app.add_subcommand("capture", "Simulate marker capture sessions");
  cap->add_option("--frames", frames, "Number of frames (default from config)");
  cap->add_option("--output", frames_out, "Frames file (default <out>/frames.jsonl)");
  std::string stage;
  auto* train = app.add_subcommand("train", "Train a model");
  train->add_option("stage", stage, "fk | s2r | baseline")->required()->check(CLI::IsMember({"fk", "s2r", "baseline"}));
  auto* eval = app.add_subcommand("eval", "Evaluate FK and calibration models on held-out actuations");
  std::optional<std::string> actuation;
  auto* mk = app.add_subcommand("make-target", "Write a reachable target mesh from the calibrated pipeline");
  mk->add_option("--actuation", actuation, "Comma-separated 9-vector (default: seeded random)");
  std::string target;
  std::optional<std::string> a0;
  auto* solve = app.add_subcommand("solve", "Solve inverse kinematics for a target mesh");
  solve->add_option("--target", target, "Target OBJ")->required();
  solve->add_option("--a0", a0, "Initial actuation, comma-separated (default 0.5 each)");
  std::string kind;
  auto* audit = app.add_subcommand("audit", "Run a gradient or ablation audit");
  audit->add_option("kind", kind, "gradcheck | gradcost | ablation")->required()->check(CLI::IsMember({"gradcheck", "gradcost", "ablation"}));

  std::vector<std::string> argv_store{"surfkin"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    const json cfg = load_config(config_path ? std::optional<fs::path>(*config_path) : std::nullopt, overrides);
    Runner r(cfg, out_dir ? fs::path(*out_dir) : default_root(), out);
    if (gen->parsed()) r.gen_dataset();
    if (cap->parsed()) r.capture(frames, frames_out ? std::optional<fs::path>(*frames_out) : std::nullopt);
    if (train->parsed()) r.train(stage);
    if (eval->parsed()) r.eval();
    if (mk->parsed()) r.make_target(actuation);
    if (solve->parsed()) r.solve(target, a0);
    if (audit->parsed()) r.audit(kind);
  } catch (const MissingPrerequisite& e) {
    err << "error: " << e.what() << '\n';
    return kExitMissing;
  } catch (const AuditFailure& e) {
    err << "error: " << e.what() << '\n';
    return kExitAudit;
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace surfkin::cli
