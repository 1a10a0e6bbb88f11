#include "petrecon/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <map>
#include <set>

#include <json.hpp>

#include "petrecon/acquisition.hpp"
#include "petrecon/admm.hpp"
#include "petrecon/classic.hpp"
#include "petrecon/io.hpp"
#include "petrecon/parallel.hpp"
#include "petrecon/phantom.hpp"
#include "petrecon/plot.hpp"
#include "petrecon/random.hpp"
#include "petrecon/trainer.hpp"

namespace petrecon::pipeline {

using json = nlohmann::json;

namespace paths {
namespace {
std::string numbered(const char* pattern, int a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, pattern, a);
  return buf;
}
}  // namespace

std::string train_activity(int i) { return numbered("phantoms/train_%02d_activity.piv", i); }
std::string train_labels(int i) { return numbered("phantoms/train_%02d_labels.piv", i); }
std::string train_high(int i) { return numbered("data/train_%02d_high.psg", i); }
std::string train_low(int i) { return numbered("data/train_%02d_low.psg", i); }
std::string test_low(int r, bool with_lesion) {
  return numbered(with_lesion ? "data/test_r%02d_low.psg" : "data/test_nolesion_r%02d_low.psg", r);
}
std::string train_label_image(int i) { return numbered("train/phantom_%02d_label.piv", i); }
std::string train_input_image(int i, int iteration) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "train/phantom_%02d_input_it%03d.piv", i, iteration);
  return buf;
}
std::string recon(const std::string& method) { return "recon/" + method + ".piv"; }
std::string lesion_difference_image(const std::string& method) { return "eval/lesion_difference_" + method + ".piv"; }
}  // namespace paths

namespace {

// Stream identifiers for derive_seed.
enum Stream : std::uint64_t {
  kPhantomStream = 1,
  kKineticsStream,
  kTrainSimStream,
  kTrainThinStream,
  kTestSimStream,
  kTestThinStream,
  kRoiStream,
  kTrainStream,
};

constexpr int kTestPhantomId = 1000;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class Manifest {
 public:
  Manifest(fs::path out, std::string hash) : out_(std::move(out)), hash_(std::move(hash)) {
    const fs::path p = out_ / paths::kManifest;
    if (fs::exists(p)) {
      try {
        const json j = json::parse(io::read_text(p));
        for (const auto& e : j.at("artifacts")) entries_[e.at("path").get<std::string>()] = e;
      } catch (const std::exception&) {
        entries_.clear();  // rewritten from scratch below
      }
    }
  }

  void record(const std::string& kind, const std::string& rel, const std::string& command) {
    entries_[rel] = json{{"kind", kind}, {"path", rel}, {"command", command}, {"config_hash", hash_}};
  }

  void save() const {
    json j;
    j["config_hash"] = hash_;
    j["artifacts"] = json::array();
    for (const auto& [path, e] : entries_) j["artifacts"].push_back(e);
    io::write_text(out_ / paths::kManifest, j.dump(2) + "\n");
  }

 private:
  fs::path out_;
  std::string hash_;
  std::map<std::string, json> entries_;
};

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

phantom::DeskPhantomOptions phantom_options(const config::RunConfig& cfg, bool test) {
  phantom::DeskPhantomOptions o = cfg.phantom.shape;
  if (test) {
    o.n_lesions = cfg.phantom.test_lesions;
    o.lesion_diameter_min = cfg.phantom.test_lesion_diameter;
    o.lesion_diameter_max = cfg.phantom.test_lesion_diameter;
  } else {
    o.n_lesions = cfg.phantom.train_lesions;
  }
  return o;
}

std::vector<int> sorted_union(std::initializer_list<std::vector<int>> lists) {
  std::set<int> s;
  for (const auto& l : lists) s.insert(l.begin(), l.end());
  return {s.begin(), s.end()};
}

}  // namespace

// ---------------------------------------------------------------------------

Pipeline::Pipeline(config::RunConfig cfg, Logger log) : cfg_(std::move(cfg)), log_(std::move(log)) {
  config::validate(cfg_);
  out_ = cfg_.output_path();
  set_max_threads(cfg_.threads);
  if (!log_) log_ = [](const std::string&) {};
}

const projector::SystemMatrix& Pipeline::matrix() {
  if (!matrix_) {
    matrix_ = std::make_shared<const projector::SystemMatrix>(projector::build_system_matrix(cfg_.scanner, cfg_.grid));
  }
  return *matrix_;
}

namespace {

struct Context {
  const config::RunConfig& cfg;
  fs::path out;
  Manifest manifest;
  std::string command;

  Context(const config::RunConfig& c, const fs::path& o, const std::string& cmd)
      : cfg(c), out(o), manifest(o, config::config_hash(c)), command(cmd) {}

  fs::path path(const std::string& rel) const { return out / rel; }

  fs::path require(const std::string& rel, const std::string& producer) const {
    const fs::path p = path(rel);
    if (!fs::exists(p)) throw MissingArtifactError(p.string(), producer);
    return p;
  }

  Volume read_volume(const std::string& rel, const std::string& producer) const {
    Volume v = io::read_volume(require(rel, producer), cfg.grid.slice_thickness);
    if (!(v.grid() == cfg.grid)) {
      throw ConfigError("'" + path(rel).string() + "' does not match the configured grid; rerun `petrecon " + producer + "`");
    }
    return v;
  }

  io::StoredAcquisition read_acquisition(const std::string& rel, const std::string& producer) const {
    require(rel, producer);
    require(rel + ".s", producer);
    require(rel + ".r", producer);
    auto a = io::read_acquisition(path(rel));
    if (a.counts.n_slices() != cfg.grid.nz || a.counts.n_angles() != cfg.scanner.n_angles ||
        a.counts.n_bins() != cfg.scanner.n_bins) {
      throw ConfigError("'" + path(rel).string() + "' does not match the configured scanner/grid; rerun `petrecon " +
                        producer + "`");
    }
    return a;
  }

  nn::NetworkWeights read_weights() const {
    auto w = io::read_weights(require(paths::kWeights, "train"));
    if (!(w.config == cfg.network)) {
      throw ConfigError("'" + path(paths::kWeights).string() +
                        "' was trained with a different network configuration; rerun `petrecon train`");
    }
    return w;
  }

  void write(const std::string& rel, const Volume& v, const char* kind = "image") {
    io::write_volume(path(rel), v);
    manifest.record(kind, rel, command);
  }
  void write(const std::string& rel, const Sinogram& counts, const acquisition::MeanComponents& bg) {
    io::write_acquisition(path(rel), counts, bg);
    manifest.record("sinogram", rel, command);
    manifest.record("sinogram", rel + ".s", command);
    manifest.record("sinogram", rel + ".r", command);
  }
  void write_text(const std::string& rel, const std::string& text, const char* kind) {
    io::write_text(path(rel), text);
    manifest.record(kind, rel, command);
  }
  void recorded(const std::string& rel, const char* kind) { manifest.record(kind, rel, command); }
};

// Low-count data of the test phantom with the matching (thinned) system
// matrix, so images come out on the high-count activity scale.
struct LowCountProblem {
  io::StoredAcquisition acq;
  projector::SystemMatrix P_low;
  recon::PoissonData data() const {
    return {&P_low, &acq.counts, &acq.background.scatter, &acq.background.randoms};
  }
};

double read_scale(const Context& ctx, const char* key) {
  const json j = json::parse(io::read_text(ctx.require(paths::kScales, "simulate")));
  return j.at(key).get<double>();
}

}  // namespace

void Pipeline::phantom() {
  Context ctx(cfg_, out_, "phantom");
  const auto& pc = cfg_.phantom;
  auto make = [&](std::uint64_t phantom_seed, bool test) {
    const auto spec = phantom::make_desk_phantom(cfg_.grid, phantom_seed, phantom_options(cfg_, test));
    const auto table = phantom::sample_tissue_table(pc.kinetics_cv, derive_seed(phantom_seed, {kKineticsStream}));
    return std::make_pair(spec, table);
  };
  for (int i = 0; i < pc.n_train; ++i) {
    const auto [spec, table] = make(derive_seed(cfg_.seed, {kPhantomStream, static_cast<std::uint64_t>(i)}), false);
    const auto labels = phantom::rasterize_phantom(spec, cfg_.grid);
    ctx.write(paths::train_labels(i), labels.labels, "labels");
    ctx.write(paths::train_activity(i), phantom::frame_activity(labels, table, pc.frame, pc.input));
  }
  const auto [spec, table] = make(derive_seed(cfg_.seed, {kPhantomStream, kTestPhantomId}), true);
  const auto labels = phantom::rasterize_phantom(spec, cfg_.grid);
  phantom::PhantomSpec clean = spec;
  clean.lesions.clear();
  const auto clean_labels = phantom::rasterize_phantom(clean, cfg_.grid);
  ctx.write(paths::kTestLabels, labels.labels, "labels");
  ctx.write(paths::kTestActivity, phantom::frame_activity(labels, table, pc.frame, pc.input));
  ctx.write(paths::kTestNoLesionActivity, phantom::frame_activity(clean_labels, table, pc.frame, pc.input));

  json tissues = json::object();
  for (const auto& [label, tissue] : labels.tissues) tissues[std::to_string(label)] = tissue;
  ctx.write_text(paths::kTissues, tissues.dump(2) + "\n", "labels");
  ctx.manifest.save();
  log_("phantom: wrote " + std::to_string(pc.n_train) + " training phantoms and the test phantom");
}

void Pipeline::simulate() {
  Context ctx(cfg_, out_, "simulate");
  const auto& P = matrix();
  const auto& ac = cfg_.acquisition;
  auto acq_cfg = [&](std::uint64_t seed) {
    return acquisition::AcquisitionConfig{ac.target_true_counts, ac.background_fraction, seed};
  };
  for (int i = 0; i < cfg_.phantom.n_train; ++i) {
    const Volume x = ctx.read_volume(paths::train_activity(i), "phantom");
    const auto ui = static_cast<std::uint64_t>(i);
    const auto high = acquisition::simulate_counts(P, x, acq_cfg(derive_seed(cfg_.seed, {kTrainSimStream, ui})));
    ctx.write(paths::train_high(i), high.counts, high.background);
    const Sinogram low = acquisition::thin_counts(high.counts, ac.thin_ratio, derive_seed(cfg_.seed, {kTrainThinStream, ui}));
    ctx.write(paths::train_low(i), low, acquisition::scale_background(high.background, ac.thin_ratio));
  }

  const Volume x = ctx.read_volume(paths::kTestActivity, "phantom");
  const Volume x_clean = ctx.read_volume(paths::kTestNoLesionActivity, "phantom");
  // The lesion-free twin reuses the lesion phantom's activity scale so that
  // with/without differences isolate the lesion.
  const double trues_with = sum(projector::forward_project(P, x).values());
  const double trues_clean = sum(projector::forward_project(P, x_clean).values());
  double scale = 0.0;
  double scale_clean = 0.0;
  for (int r = 0; r < cfg_.eval.realizations; ++r) {
    const auto ur = static_cast<std::uint64_t>(r);
    const std::uint64_t sim_seed = derive_seed(cfg_.seed, {kTestSimStream, ur});
    const std::uint64_t thin_seed = derive_seed(cfg_.seed, {kTestThinStream, ur});
    for (bool with_lesion : {true, false}) {
      auto c = acq_cfg(sim_seed);
      if (!with_lesion) c.target_true_counts *= trues_clean / trues_with;
      const auto high = acquisition::simulate_counts(P, with_lesion ? x : x_clean, c);
      (with_lesion ? scale : scale_clean) = high.activity_scale;
      const Sinogram low = acquisition::thin_counts(high.counts, ac.thin_ratio, thin_seed);
      ctx.write(paths::test_low(r, with_lesion), low, acquisition::scale_background(high.background, ac.thin_ratio));
    }
  }
  const json scales{{"test", scale}, {"test_nolesion", scale_clean}};
  ctx.write_text(paths::kScales, scales.dump(2) + "\n", "json");
  ctx.manifest.save();
  log_("simulate: wrote " + std::to_string(cfg_.phantom.n_train) + " training acquisitions and " +
       std::to_string(cfg_.eval.realizations) + " test realizations");
}

void Pipeline::build_train_set() {
  Context ctx(cfg_, out_, "build-train-set");
  const auto& P = matrix();
  const projector::SystemMatrix P_low = P.scaled(cfg_.acquisition.thin_ratio);
  const auto& tc = cfg_.training;
  const int n = cfg_.phantom.n_train;

  std::vector<io::StoredAcquisition> high;
  std::vector<io::StoredAcquisition> low;
  for (int i = 0; i < n; ++i) {
    high.push_back(ctx.read_acquisition(paths::train_high(i), "simulate"));
    low.push_back(ctx.read_acquisition(paths::train_low(i), "simulate"));
  }
  std::vector<Volume> labels(n);
  std::vector<std::map<int, Volume>> inputs(n);
  parallel_for(n, [&](std::size_t i) {
    recon::ReconConfig label_cfg;
    label_cfg.iterations = tc.label_iterations;
    label_cfg.snapshots = {};
    const auto& h = high[i];
    labels[i] = recon::mlem({&P, &h.counts, &h.background.scatter, &h.background.randoms}, label_cfg).image;

    recon::ReconConfig input_cfg;
    input_cfg.iterations = tc.input_iterations.back();
    input_cfg.snapshots = tc.input_iterations;
    const auto& l = low[i];
    inputs[i] = recon::mlem({&P_low, &l.counts, &l.background.scatter, &l.background.randoms}, input_cfg).snapshots;
  });
  for (int i = 0; i < n; ++i) {
    ctx.write(paths::train_label_image(i), labels[i]);
    for (int it : tc.input_iterations) ctx.write(paths::train_input_image(i, it), inputs[i].at(it));
  }
  ctx.manifest.save();
  log_("build-train-set: " + std::to_string(n * static_cast<int>(tc.input_iterations.size()) * cfg_.grid.nz) +
       " training pairs");
}

void Pipeline::train() {
  Timer timer;
  Context ctx(cfg_, out_, "train");
  const auto& tc = cfg_.training;
  std::vector<nn::TrainingPair> pairs;
  const int nz = cfg_.grid.nz;
  const int nx = cfg_.grid.nx;
  const int ny = cfg_.grid.ny;
  for (int i = 0; i < cfg_.phantom.n_train; ++i) {
    const Volume label = ctx.read_volume(paths::train_label_image(i), "build-train-set");
    for (int it : tc.input_iterations) {
      const nn::Tensor windows =
          nn::slice_windows(ctx.read_volume(paths::train_input_image(i, it), "build-train-set"), cfg_.network.in_channels);
      for (int k = 0; k < nz; ++k) {
        nn::Tensor in(nn::Shape{1, cfg_.network.in_channels, ny, nx});
        std::copy(windows.item(k).begin(), windows.item(k).end(), in.values().begin());
        nn::Tensor lab(nn::Shape{1, 1, ny, nx});
        std::copy(label.slice(k).begin(), label.slice(k).end(), lab.values().begin());
        pairs.push_back({std::move(in), std::move(lab)});
      }
    }
  }
  nn::TrainConfig train_cfg = tc.train;
  train_cfg.seed = derive_seed(cfg_.seed, {kTrainStream});
  const auto result = nn::train(pairs, cfg_.network, train_cfg, nullptr, [&](int epoch, double loss) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "train: epoch %d/%d loss %.6g (%.0f s)", epoch + 1, train_cfg.epochs, loss,
                  timer.seconds());
    log_(buf);
  });
  io::write_weights(ctx.path(paths::kWeights), result.weights);
  ctx.recorded(paths::kWeights, "weights");
  std::string csv = "epoch,loss\n";
  for (std::size_t e = 0; e < result.loss_history.size(); ++e) {
    csv += std::to_string(e + 1) + "," + fmt(result.loss_history[e]) + "\n";
  }
  ctx.write_text(paths::kLossHistory, csv, "csv");
  ctx.manifest.save();
  train_seconds_ = timer.seconds();
}

namespace {

LowCountProblem load_test(const Context& ctx, const projector::SystemMatrix& P, int r, bool with_lesion) {
  return {ctx.read_acquisition(paths::test_low(r, with_lesion), "simulate"), P.scaled(ctx.cfg.acquisition.thin_ratio)};
}

Volume run_mlem(const recon::PoissonData& d, int iterations) {
  recon::ReconConfig c;
  c.iterations = iterations;
  c.snapshots = {};
  return recon::mlem(d, c).image;
}

Volume run_mapem(const config::RunConfig& cfg, const recon::PoissonData& d, double beta) {
  recon::ReconConfig c;
  c.iterations = cfg.mapem.iterations;
  c.snapshots = {};
  recon::PenaltyConfig pen = cfg.mapem.penalty;
  pen.beta = beta;
  return recon::mapem_fair(d, c, pen).image;
}

void check_method(const std::string& m) {
  if (std::find(kMethods.begin(), kMethods.end(), m) == kMethods.end()) {
    throw ConfigError("unknown method '" + m + "' (expected mlem, mapem, gauss, cnn-denoise or cnn-admm)");
  }
}

admm::FailureHandler dump_state(const fs::path& dir) {
  return [dir](const admm::AdmmState& s) {
    io::write_volume(dir / "admm_failure_x.piv", s.x);
    io::write_volume(dir / "admm_failure_alpha.piv", s.alpha);
    io::write_volume(dir / "admm_failure_mu.piv", s.mu);
  };
}

}  // namespace

void Pipeline::reconstruct(const ReconstructOptions& opt) {
  Context ctx(cfg_, out_, "reconstruct");
  if (opt.methods.empty()) throw ConfigError("no reconstruction method given");
  for (const auto& m : opt.methods) check_method(m);
  if (opt.realization < 0 || opt.realization >= cfg_.eval.realizations) {
    throw ConfigError("realization must lie in [0, eval.realizations)");
  }
  if (opt.fwhm && *opt.fwhm < 0.0) throw ConfigError("--fwhm must be >= 0");
  if (opt.beta && *opt.beta < 0.0) throw ConfigError("--beta must be >= 0");
  const auto prob = load_test(ctx, matrix(), opt.realization, true);
  const auto data = prob.data();
  for (const auto& m : opt.methods) {
    Volume image;
    if (m == "mlem") {
      image = run_mlem(data, cfg_.mlem.iterations);
    } else if (m == "gauss") {
      image = recon::gaussian_postfilter(run_mlem(data, cfg_.mlem.iterations), opt.fwhm.value_or(cfg_.mlem.fwhm));
    } else if (m == "mapem") {
      image = run_mapem(cfg_, data, opt.beta.value_or(cfg_.mapem.penalty.beta));
    } else if (m == "cnn-denoise") {
      image = nn::denoise_volume(ctx.read_weights(), run_mlem(data, cfg_.mlem.iterations));
    } else {
      const auto w = ctx.read_weights();
      const auto res = admm::reconstruct_admm(data, w, cfg_.admm, dump_state(ctx.path("recon")));
      image = res.image;
      io::write_diagnostics(ctx.path(paths::kReconDiagnostics), res.diagnostics);
      ctx.recorded(paths::kReconDiagnostics, "csv");
    }
    ctx.write(paths::recon(m), image);
    log_("reconstruct: wrote " + paths::recon(m));
  }
  ctx.manifest.save();
}

namespace {

// Images of one realization for every sweep point, keyed by method then
// sweep index.
struct RealizationImages {
  std::map<std::string, std::vector<Volume>> images;
  std::vector<admm::Diagnostics> diagnostics;
};

}  // namespace

void Pipeline::evaluate() {
  Timer timer;
  Context ctx(cfg_, out_, "evaluate");
  const auto& ec = cfg_.eval;
  const auto w = ctx.read_weights();
  const auto& P = matrix();

  // ROIs on the test phantom.
  const Volume labels = ctx.read_volume(paths::kTestLabels, "phantom");
  const Volume truth = ctx.read_volume(paths::kTestActivity, "phantom");
  const Volume truth_clean = ctx.read_volume(paths::kTestNoLesionActivity, "phantom");
  const json tissues = json::parse(io::read_text(ctx.require(paths::kTissues, "phantom")));
  const double scale = read_scale(ctx, "test");
  phantom::LabelVolume lv{labels, {}};
  for (const auto& [k, v] : tissues.items()) lv.tissues[std::stoi(k)] = v.get<std::string>();
  eval::RoiSpec roi;
  roi.lesion = phantom::lesion_voxels(lv);
  if (roi.lesion.empty()) throw ConfigError("the test phantom has no lesion voxels");
  roi.a_true = scale * eval::roi_mean(truth, roi.lesion);
  const auto background = phantom::tissue_voxels(lv, ec.background_tissue);
  if (background.empty()) throw ConfigError("key 'eval.background_tissue': no voxels of tissue '" + ec.background_tissue + "'");
  roi.background = eval::place_background_rois(cfg_.grid, background, roi.lesion, ec.background_rois, ec.roi_radius,
                                               derive_seed(cfg_.seed, {kRoiStream}));
  roi.validate(truth.size());

  const std::vector<int> mlem_its = sorted_union({ec.mlem_iterations, ec.denoise_iterations, {ec.gauss_iteration}});
  admm::AdmmConfig admm_cfg = cfg_.admm;
  admm_cfg.snapshots = ec.admm_iterations;

  const int R = ec.realizations;
  std::vector<RealizationImages> per(R);
  parallel_for(R, [&](std::size_t r) {
    const auto prob = load_test(ctx, P, static_cast<int>(r), true);
    const auto data = prob.data();
    auto& out = per[r].images;
    recon::ReconConfig mc;
    mc.iterations = mlem_its.back();
    mc.snapshots = mlem_its;
    const auto ml = recon::mlem(data, mc);
    for (int it : ec.mlem_iterations) out["mlem"].push_back(ml.snapshots.at(it));
    for (double f : ec.gauss_fwhm) out["gauss"].push_back(recon::gaussian_postfilter(ml.snapshots.at(ec.gauss_iteration), f));
    for (int it : ec.denoise_iterations) out["cnn-denoise"].push_back(nn::denoise_volume(w, ml.snapshots.at(it)));
    for (double b : ec.mapem_beta) out["mapem"].push_back(run_mapem(cfg_, data, b));
    auto res = admm::reconstruct_admm(data, w, admm_cfg, dump_state(ctx.path("eval")));
    for (int it : ec.admm_iterations) out["cnn-admm"].push_back(std::move(res.snapshots.at(it)));
    per[r].diagnostics = std::move(res.diagnostics);
    log_("evaluate: realization " + std::to_string(r + 1) + "/" + std::to_string(R) + " done (" +
         std::to_string(static_cast<int>(timer.seconds())) + " s)");
  });

  std::vector<eval::Curve> curves;
  auto sweep_values = [&](const std::string& m) {
    std::vector<double> v;
    if (m == "mlem") v.assign(ec.mlem_iterations.begin(), ec.mlem_iterations.end());
    if (m == "gauss") v = ec.gauss_fwhm;
    if (m == "mapem") v = ec.mapem_beta;
    if (m == "cnn-denoise") v.assign(ec.denoise_iterations.begin(), ec.denoise_iterations.end());
    if (m == "cnn-admm") v.assign(ec.admm_iterations.begin(), ec.admm_iterations.end());
    return v;
  };
  for (const auto& m : kMethods) {
    eval::Curve c{m, {}};
    const auto values = sweep_values(m);
    for (std::size_t k = 0; k < values.size(); ++k) {
      std::vector<Volume> set;
      set.reserve(R);
      for (int r = 0; r < R; ++r) set.push_back(per[r].images.at(m)[k]);
      c.points.push_back(eval::evaluate_point(values[k], set, roi));
    }
    curves.push_back(std::move(c));
  }
  io::write_curves(ctx.path(paths::kCurves), curves);
  ctx.recorded(paths::kCurves, "csv");
  io::write_realizations(ctx.path(paths::kRealizations), curves);
  ctx.recorded(paths::kRealizations, "csv");

  // Ordering comparisons at a common mid-range STD.
  auto curve = [&](const std::string& m) -> const eval::Curve& {
    return *std::find_if(curves.begin(), curves.end(), [&](const eval::Curve& c) { return c.method == m; });
  };
  const std::vector<eval::Curve> compared{curve("cnn-admm"), curve("cnn-denoise"), curve("gauss")};
  std::string cmp = "method_a,method_b,std,cr_a,cr_b,mean_difference,standard_error\n";
  if (const auto s = eval::common_std(compared)) {
    for (const auto& [a, b] : std::vector<std::pair<std::string, std::string>>{
             {"cnn-admm", "cnn-denoise"}, {"cnn-denoise", "gauss"}, {"cnn-admm", "gauss"}}) {
      const auto pc = eval::compare_at_std(curve(a), curve(b), *s);
      cmp += a + "," + b + "," + fmt(pc.std) + "," + fmt(pc.cr_a) + "," + fmt(pc.cr_b) + "," + fmt(pc.mean_difference) +
             "," + fmt(pc.standard_error) + "\n";
    }
  } else {
    log_("evaluate: STD ranges of cnn-admm, cnn-denoise and gauss do not overlap; comparison table left empty");
  }
  ctx.write_text(paths::kComparison, cmp, "csv");

  io::write_diagnostics(ctx.path(paths::kAdmmDiagnostics), per[0].diagnostics);
  ctx.recorded(paths::kAdmmDiagnostics, "csv");
  std::string sub = "iter,step,objective\n";
  for (const auto& d : per[0].diagnostics) {
    for (std::size_t k = 0; k < d.sub_objectives.size(); ++k) {
      sub += std::to_string(d.iteration) + "," + std::to_string(k) + "," + fmt(d.sub_objectives[k]) + "\n";
    }
  }
  ctx.write_text(paths::kAdmmSubObjectives, sub, "csv");

  // Denoiser efficacy on realization 0 of the held-out phantom.
  {
    Volume scaled_truth = truth;
    for (auto& v : scaled_truth.values()) v *= scale;
    const auto mse = [&](const Volume& a) {
      double acc = 0.0;
      for (std::size_t j = 0; j < a.size(); ++j) acc += (a[j] - scaled_truth[j]) * (a[j] - scaled_truth[j]);
      return acc / static_cast<double>(a.size());
    };
    const auto prob = load_test(ctx, P, 0, true);
    recon::ReconConfig mc;
    mc.iterations = cfg_.training.input_iterations.back();
    mc.snapshots = cfg_.training.input_iterations;
    const auto ml = recon::mlem(prob.data(), mc);
    std::string csv = "iteration,mse_input,mse_denoised,reduction\n";
    for (int it : cfg_.training.input_iterations) {
      const Volume& in = ml.snapshots.at(it);
      const double a = mse(in);
      const double b = mse(nn::denoise_volume(w, in));
      csv += std::to_string(it) + "," + fmt(a) + "," + fmt(b) + "," + fmt(1.0 - b / a) + "\n";
    }
    ctx.write_text(paths::kDenoiseEfficacy, csv, "csv");
  }

  // Lesion-only images from realization 0 with and without the lesions.
  {
    const auto with = load_test(ctx, P, 0, true);
    const auto without = load_test(ctx, P, 0, false);
    eval::RoiSpec diff_roi = roi;
    diff_roi.background.clear();
    double inserted = 0.0;
    for (std::size_t j : roi.lesion) inserted += scale * (truth[j] - truth_clean[j]);
    diff_roi.a_true = inserted / static_cast<double>(roi.lesion.size());
    std::string csv = "method,cr\n";
    for (const std::string m : {"mlem", "cnn-admm"}) {
      Volume a;
      Volume b;
      if (m == "mlem") {
        a = run_mlem(with.data(), cfg_.mlem.iterations);
        b = run_mlem(without.data(), cfg_.mlem.iterations);
      } else {
        a = admm::reconstruct_admm(with.data(), w, cfg_.admm).image;
        b = admm::reconstruct_admm(without.data(), w, cfg_.admm).image;
      }
      const Volume d = eval::lesion_difference(a, b);
      ctx.write(paths::lesion_difference_image(m), d);
      const std::vector<Volume> one{d};
      csv += m + "," + fmt(eval::contrast_recovery(one, diff_roi)) + "\n";
    }
    ctx.write_text(paths::kLesionDifference, csv, "csv");
  }
  ctx.manifest.save();
  evaluate_seconds_ = timer.seconds();
  log_("evaluate: done in " + std::to_string(static_cast<int>(evaluate_seconds_)) + " s");
}

void Pipeline::plot() {
  Context ctx(cfg_, out_, "plot");
  const auto curves = io::read_curves(ctx.require(paths::kCurves, "evaluate"));
  ctx.write_text(paths::kPlot, plot::cr_std_svg(curves), "plot");
  ctx.manifest.save();
}

void Pipeline::all() {
  phantom();
  simulate();
  build_train_set();
  train();
  ReconstructOptions opt;
  opt.methods = kMethods;
  reconstruct(opt);
  evaluate();
  plot();
}

void Pipeline::run(const std::string& sub, const ReconstructOptions& opt) {
  if (sub == "phantom") return phantom();
  if (sub == "simulate") return simulate();
  if (sub == "build-train-set") return build_train_set();
  if (sub == "train") return train();
  if (sub == "reconstruct") return reconstruct(opt);
  if (sub == "evaluate") return evaluate();
  if (sub == "plot") return plot();
  if (sub == "all") return all();
  throw ConfigError("unknown subcommand '" + sub + "'");
}

}  // namespace petrecon::pipeline
