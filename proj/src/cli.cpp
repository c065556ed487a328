#include "specref/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "specref/io.hpp"
#include "specref/rng.hpp"
#include "specref/train.hpp"

namespace specref {

namespace {

SolverConfig solver_from(const RunConfig& c) {
  SolverConfig s;
  std::string scheme = c.gets("solver.scheme", "imex_rk4");
  if (scheme == "imex_rk4")
    s.scheme = Scheme::imex_rk4;
  else if (scheme == "rk2_cn")
    s.scheme = Scheme::rk2_cn;
  else
    throw std::invalid_argument("unknown scheme: " + scheme);
  std::string form = c.gets("solver.formulation", "vs");
  s.form = form == "vp" ? Formulation::vp : Formulation::vs;
  s.dt = c.getd("solver.dt", 1e-3);
  s.nu = c.getd("solver.nu", 1e-3);
  s.drag = c.getd("solver.drag", 0.0);
  return s;
}

IcSpec ic_from(const RunConfig& c, uint64_t seed_override) {
  IcSpec ic;
  std::string kind = c.gets("ic.kind", "mcwilliams");
  if (kind == "taylor_green")
    ic.kind = IcKind::taylor_green;
  else if (kind == "grf")
    ic.kind = IcKind::grf;
  else if (kind == "mcwilliams")
    ic.kind = IcKind::mcwilliams;
  else
    throw std::invalid_argument("unknown ic kind: " + kind);
  ic.seed = seed_override ? seed_override : c.getu("ic.seed", 1);
  ic.kappa = c.geti("ic.kappa", 1);
  ic.alpha = c.getd("ic.alpha", 2.5);
  ic.tau_grf = c.getd("ic.tau", 7.0);
  ic.k0 = c.geti("ic.k0", 4);
  ic.tau_mc = c.getd("ic.tau", 1.0);
  ic.normalize_energy = c.getd("ic.normalize_energy", 1.0);
  return ic;
}

DatasetSpec dataset_from(const RunConfig& c) {
  DatasetSpec d;
  d.n_train = c.geti("dataset.n_train", 8);
  d.n_test = c.geti("dataset.n_test", 2);
  d.n_gen = c.geti("dataset.n_gen", 128);
  d.n_down = c.geti("dataset.n_down", 64);
  d.L = c.getd("grid.L", 1.0);
  d.dt = c.getd("solver.dt", 1e-3);
  d.burn_in = c.getd("dataset.burn_in", 2.0);
  d.ell = c.geti("dataset.ell", 10);
  d.n_t = c.geti("dataset.n_t", 10);
  d.delta_t = c.getd("dataset.delta_t", 0.05);
  return d;
}

StfnoConfig model_from(const RunConfig& c, uint64_t seed_override) {
  StfnoConfig m;
  m.layers = c.geti("model.layers", 2);
  m.d_v = c.geti("model.d_v", 8);
  m.d_t = c.geti("model.d_t", 10);
  m.tau_max = c.geti("model.tau_max", 5);
  m.k_max = c.geti("model.k_max", 8);
  m.t_pad = c.getd("model.t_pad", 0.2);
  m.helmholtz = c.getb("model.helmholtz", true);
  m.form = c.gets("model.formulation", "vs") == "vp" ? Formulation::vp
                                                     : Formulation::vs;
  m.act = c.gets("model.activation", "gelu") == "linear" ? Activation::linear
                                                         : Activation::gelu;
  m.n_train = c.geti("dataset.n_down", c.geti("grid.n", 64));
  m.L = c.getd("grid.L", 1.0);
  m.seed = seed_override ? seed_override : c.getu("model.seed", 1);
  return m;
}

int cmd_generate(const RunConfig& cfg, const std::string& out, uint64_t seed) {
  DatasetSpec spec = dataset_from(cfg);
  SolverConfig sc = solver_from(cfg);
  IcSpec ic = ic_from(cfg, seed);
  Dataset ds;
  std::map<std::string, std::string> meta;
  if (ic.kind == IcKind::taylor_green) {
    std::vector<int> kappas;
    int klo = cfg.geti("dataset.kappa_min", 1);
    int khi = cfg.geti("dataset.kappa_max", spec.n_train + spec.n_test);
    for (int k = klo; k <= khi; ++k) kappas.push_back(k);
    ds = generate_taylor_green_dataset(spec, kappas, sc);
    meta["ic"] = "taylor_green";
    meta["kappa_min"] = std::to_string(klo);
    meta["kappa_max"] = std::to_string(khi);
  } else {
    ds = generate_dataset(spec, ic, sc);
    meta["ic"] = ic.kind == IcKind::grf ? "grf" : "mcwilliams";
    meta["seed"] = std::to_string(ic.seed);
    meta["k0"] = std::to_string(ic.k0);
    meta["alpha"] = format_g17(ic.alpha);
  }
  meta["dt"] = format_g17(spec.dt);
  meta["burn_in"] = format_g17(spec.burn_in);
  meta["n_train"] = std::to_string(spec.n_train);
  meta["n_test"] = std::to_string(spec.n_test);
  save_dataset(out, ds, meta);
  std::cout << "wrote " << ds.samples.size() << " trajectories to " << out
            << "\n";
  return 0;
}

int cmd_solve(const RunConfig& cfg, const std::string& out, uint64_t seed) {
  GridPtr g = make_grid(cfg.geti("grid.n", 64), cfg.getd("grid.L", 1.0));
  SolverConfig sc = solver_from(cfg);
  IcSpec ic = ic_from(cfg, seed);
  SpectralField f0 = ic.kind == IcKind::taylor_green
                         ? taylor_green(ic.kappa, sc.nu, 0.0, g).omega
                         : sample_ic(ic, g);
  make_mean_free(f0);
  SolverState st{0.0, std::move(f0)};
  double t_end = cfg.getd("solver.t_end", 1.0);
  int rec = cfg.geti("solver.record_every", 50);
  SpectralTrajectory traj = advance(st, sc, t_end, rec);
  Sfc1Array times;
  times.name = "times";
  times.dims = {traj.times.size()};
  times.f64 = traj.times;
  Sfc1Array snaps;
  snaps.name = "omega";
  snaps.dims = {traj.size(), uint64_t(g->n), uint64_t(g->n)};
  for (const auto& f : traj.snapshots) {
    RVec phys = inverse(f);
    snaps.f64.insert(snaps.f64.end(), phys.begin(), phys.end());
  }
  write_sfc1(out, {std::move(times), std::move(snaps)});
  std::cout << "wrote " << traj.size() << " snapshots to " << out << "\n";
  return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& data_dir,
              const std::string& out, uint64_t seed) {
  Dataset ds = load_dataset(data_dir);
  StfnoConfig mc = model_from(cfg, seed);
  mc.n_train = ds.n;
  StfnoModel model = make_model(mc);
  TrainConfig tc;
  tc.epochs = cfg.geti("train.epochs", 10);
  tc.lr = cfg.getd("train.lr", 1e-3);
  tc.batch = cfg.geti("train.batch", 4);
  tc.loss = cfg.gets("train.loss", "l2") == "h_neg1" ? LossKind::h_neg1
                                                     : LossKind::l2;
  tc.one_cycle = cfg.getb("train.one_cycle", true);
  tc.weight_decay = cfg.getd("train.weight_decay", 0.0);
  auto meta = load_meta(data_dir + "/data.meta");
  int n_train = meta.count("n_train") ? std::stoi(meta.at("n_train"))
                                      : int(ds.samples.size());
  TrainResult r = train(model, ds, n_train, tc);
  save_model(out, model);
  std::vector<RVec> rows;
  for (size_t e = 0; e < r.epoch_loss.size(); ++e)
    rows.push_back({double(e + 1), r.epoch_loss[e]});
  write_csv(out + ".loss.csv", "epoch,loss", rows);
  std::cout << "trained " << r.epoch_loss.size() << " epochs, final loss "
            << (r.epoch_loss.empty() ? 0.0 : r.epoch_loss.back())
            << ", slope gap " << r.slope_gap << "\n";
  return 0;
}

struct FtFlags {
  int iters = -1;
  double lr = -1.0;
  std::string mode;
  int sample = 0;
};

int cmd_finetune(const RunConfig& cfg, const std::string& data_dir,
                 const std::string& model_path, const std::string& out,
                 const FtFlags& flags) {
  Dataset ds = load_dataset(data_dir);
  StfnoModel model = load_model(model_path);
  FinetuneConfig fc;
  fc.iters = flags.iters >= 0 ? flags.iters : cfg.geti("finetune.iters", 100);
  fc.lr = flags.lr > 0 ? flags.lr : cfg.getd("finetune.lr", 0.1);
  fc.gamma = cfg.geti("finetune.gamma", 2);
  fc.loss = cfg.gets("finetune.loss", "h_neg1") == "l2" ? LossKind::l2
                                                        : LossKind::h_neg1;
  fc.alpha = cfg.getd("finetune.alpha", 0.0);
  std::string mode = !flags.mode.empty() ? flags.mode
                                         : cfg.gets("finetune.mode", "parallel");
  fc.mode = mode == "guaranteed" ? FinetuneMode::guaranteed
                                 : FinetuneMode::parallel;
  fc.tol = cfg.getd("finetune.tol", 1e-3);
  fc.iter_max = cfg.geti("finetune.iter_max", 100);
  fc.include_reduction = cfg.getb("finetune.include_reduction", false);
  fc.nu = ds.nu;
  fc.delta_t = ds.delta_t;
  if (flags.sample < 0 || flags.sample >= int(ds.samples.size()))
    throw std::invalid_argument("finetune: sample index out of range");
  const auto& smp = ds.samples[flags.sample];
  FinetuneResult r =
      fc.mode == FinetuneMode::parallel
          ? finetune_parallel(model, smp.input, ds.ell, ds.n, ds.n_t, fc)
          : finetune_guaranteed(model, smp.input, ds.ell, ds.n, ds.n_t, fc);
  std::filesystem::create_directories(out);
  write_estimator_csv(out + "/eta.csv", r.traj.times, r.final_eta);
  std::vector<RVec> rows;
  for (size_t i = 0; i < r.eta_history.size(); ++i)
    rows.push_back({double(i), r.eta_history[i]});
  write_csv(out + "/eta_history.csv", "iter,eta", rows);
  save_model(out + "/model_ft.sfc", model);
  std::cout << "finetune eta: "
            << (r.eta_history.empty() ? 0.0 : r.eta_history.front()) << " -> "
            << (r.eta_history.empty() ? 0.0 : r.eta_history.back()) << "\n";
  return 0;
}

int cmd_evaluate(const RunConfig& cfg, const std::string& data_dir,
                 const std::string& model_path, const std::string& out) {
  Dataset ds = load_dataset(data_dir);
  StfnoModel model = load_model(model_path);
  GridPtr g = make_grid(ds.n, ds.L);
  auto meta = load_meta(data_dir + "/data.meta");
  int n_train = meta.count("n_train") ? std::stoi(meta.at("n_train"))
                                      : int(ds.samples.size());
  EstimatorConfig ec;
  ec.nu = ds.nu;
  std::vector<RVec> rows;
  for (size_t s = n_train; s < ds.samples.size(); ++s) {
    const auto& smp = ds.samples[s];
    SpectralTrajectory pred = forward(model, smp.input, ds.ell, ds.n, ds.n_t,
                                      ds.n, smp.times_in.back(), ds.delta_t);
    SpectralTrajectory ref;
    size_t plane = g->size();
    for (int m = 0; m < ds.n_t; ++m) {
      RVec pl(smp.output.begin() + m * plane,
              smp.output.begin() + (m + 1) * plane);
      ref.snapshots.push_back(transform(pl, g));
      ref.times.push_back(smp.times_out[m]);
    }
    EvalMetrics em = evaluate(pred, ref, ec);
    rows.push_back({double(s), em.rel_l2_final, em.res_neg_final_a0,
                    em.res_neg_final_a1, em.bochner_rel_l2, em.slope_pred,
                    em.slope_ref});
  }
  write_csv(out,
            "sample,rel_l2_final,res_neg1_a0,res_neg1_a1,bochner_rel_l2,"
            "slope_pred,slope_ref",
            rows);
  std::cout << "evaluated " << rows.size() << " test trajectories -> " << out
            << "\n";
  (void)cfg;
  return 0;
}

int cmd_spectra(const std::string& traj_path, const std::string& out) {
  auto arrays = read_sfc1(traj_path);
  const Sfc1Array* omega = nullptr;
  for (const auto& a : arrays)
    if (a.name == "omega") omega = &a;
  if (!omega) throw std::runtime_error("spectra: no 'omega' array in file");
  int n = int(omega->dims.back());
  GridPtr g = make_grid(n, 1.0);
  size_t plane = g->size();
  RVec last(omega->f64.end() - plane, omega->f64.end());
  SpectralField f = transform(last, g);
  write_spectrum_csv(out, enstrophy_spectrum(f));
  std::cout << "wrote enstrophy spectrum to " << out << "\n";
  return 0;
}

int cmd_verify() {
  bool ok = true;
  auto report = [&](const char* name, bool pass, double value) {
    std::printf("%s %s (%.6e)\n", pass ? "PASS" : "FAIL", name, value);
    if (!pass) ok = false;
  };
  GridPtr g = make_grid(64, 1.0);

  // Parseval: FFT norm vs mesh quadrature.
  double worst = 0.0;
  for (int s = 0; s < 10; ++s) {
    SpectralField f = grf_sample(g, 2.5, 7.0, 1000 + s);
    RVec phys = inverse(f);
    double quad = 0.0;
    for (double v : phys) quad += v * v;
    quad = std::sqrt(quad * g->dx * g->dx);
    double spec = sobolev_norm(f, NormSpec(0.0));
    worst = std::max(worst, std::abs(quad - spec) / spec);
  }
  report("parseval", worst <= 1e-12, worst);

  // Skew-symmetry of the trilinear form. Fields are normalized to unit
  // H1 seminorm (the bound scales linearly in each argument).
  auto unit_divfree = [&](uint64_t s) {
    SpectralField f =
        rot_grad(inverse_laplacian(dealias(grf_sample(g, 2.5, 7.0, s))));
    double sn = seminorm(f, 1.0);
    for (auto& z : f.coeffs) z /= sn;
    return f;
  };
  worst = 0.0;
  for (int s = 0; s < 10; ++s) {
    SpectralField z = unit_divfree(2000 + s);
    SpectralField u = unit_divfree(3000 + s);
    SpectralField v = unit_divfree(4000 + s);
    double c1 = trilinear_form(z, u, v), c2 = trilinear_form(z, v, u);
    double bound = seminorm(z, 1.0) * seminorm(u, 1.0) * seminorm(v, 1.0);
    worst = std::max(worst, std::abs(c1 + c2) / bound);
    worst = std::max(worst, std::abs(trilinear_form(z, v, v)) / bound);
  }
  report("skew_symmetry", worst <= 1e-10, worst);

  // Leray projector idempotency and divergence-free output.
  worst = 0.0;
  for (int s = 0; s < 5; ++s) {
    SpectralField w1 = grf_sample(g, 2.5, 7.0, 5000 + s);
    SpectralField w2 = grf_sample(g, 2.5, 7.0, 6000 + s);
    SpectralField u(g, true);
    std::copy(w1.coeffs.begin(), w1.coeffs.end(), u.coeffs.begin());
    std::copy(w2.coeffs.begin(), w2.coeffs.end(), u.coeffs.begin() + u.plane());
    SpectralField p1 = leray_project(u);
    SpectralField p2 = leray_project(p1);
    double dmax = 0.0, imax = 0.0, scale = 0.0;
    const auto& sy = symbols(*g);
    for (size_t m = 0; m < g->size(); ++m) {
      cplx div = sy.ikx[m] * p1.coeffs[m] + sy.iky[m] * p1.coeffs[g->size() + m];
      dmax = std::max(dmax, std::abs(div));
      imax = std::max(imax, std::abs(p2.coeffs[m] - p1.coeffs[m]));
      scale = std::max(scale, std::abs(p1.coeffs[m]));
    }
    worst = std::max(worst, std::max(dmax / (kTwoPi * 64), imax) / scale);
  }
  report("leray_projector", worst <= 1e-12, worst);

  // Norm-path equivalence (spectral seminorm vs quadrature functional).
  worst = 0.0;
  for (int s = 0; s < 10; ++s) {
    SpectralField f = grf_sample(g, 2.5, 7.0, 7000 + s);
    DualNormPair p = dual_norm_check(f);
    worst = std::max(worst, std::abs(p.functional - p.seminorm) / p.seminorm);
  }
  report("norm_equivalence", worst <= 1e-10, worst);

  // Gradient check of a spectral composite.
  GridPtr g32 = make_grid(32, 1.0);
  SpectralField probe = grf_sample(g32, 2.5, 7.0, 8000);
  ad::CTensor p0({32, 32});
  p0.v = probe.coeffs;
  auto w = neg_norm_weights(g32, 0.0);
  ad::TapedFn fn = [&](ad::Tape& t, const std::vector<int>& ids) {
    int x = t.re_project(t.ifft2(ids[0], 32));
    int y = t.gelu(x);
    int z = t.fft2(y, 32);
    return t.sum_sq_weighted(z, w, 1.0);
  };
  double err = ad::grad_check(fn, {p0}, 1e-4, 40, 99);
  report("grad_check", err <= 1e-7, err);

  std::printf("%s\n", ok ? "verify: all checks passed" : "verify: FAILURES");
  return ok ? 0 : 1;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"spectral-refine: pseudo-spectral NSE + spectral fine-tuning"};
  app.require_subcommand(1);

  std::string config_path, out = "out", data_dir, model_path, input_path;
  uint64_t seed = 0;
  FtFlags ft_flags;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key=value config file");
    sub->add_option("--out", out, "output path");
    sub->add_option("--seed", seed, "seed override");
  };

  CLI::App* gen = app.add_subcommand("generate", "build a dataset");
  add_common(gen);
  CLI::App* solve = app.add_subcommand("solve", "run the solver");
  add_common(solve);
  CLI::App* tr = app.add_subcommand("train", "train a model");
  add_common(tr);
  tr->add_option("--data", data_dir, "dataset directory")->required();
  CLI::App* ft = app.add_subcommand("finetune", "spectral fine-tuning");
  add_common(ft);
  ft->add_option("--data", data_dir, "dataset directory")->required();
  ft->add_option("--model", model_path, "model checkpoint")->required();
  ft->add_option("--sample", ft_flags.sample, "trajectory index");
  ft->add_option("--iters", ft_flags.iters, "optimizer iterations");
  ft->add_option("--lr", ft_flags.lr, "learning rate");
  ft->add_option("--mode", ft_flags.mode, "parallel|guaranteed");
  CLI::App* ev = app.add_subcommand("evaluate", "evaluate a model");
  add_common(ev);
  ev->add_option("--data", data_dir, "dataset directory")->required();
  ev->add_option("--model", model_path, "model checkpoint")->required();
  CLI::App* sp = app.add_subcommand("spectra", "emit spectrum CSV");
  add_common(sp);
  sp->add_option("--input", input_path, "trajectory file")->required();
  CLI::App* vf = app.add_subcommand("verify", "run the built-in property suite");
  add_common(vf);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help() << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n" << app.help() << "\n";
    return 2;
  }

  try {
    RunConfig cfg =
        config_path.empty() ? RunConfig::parse("") : RunConfig::load(config_path);
    if (gen->parsed()) return cmd_generate(cfg, out, seed);
    if (solve->parsed()) return cmd_solve(cfg, out, seed);
    if (tr->parsed()) return cmd_train(cfg, data_dir, out, seed);
    if (ft->parsed())
      return cmd_finetune(cfg, data_dir, model_path, out, ft_flags);
    if (ev->parsed()) return cmd_evaluate(cfg, data_dir, model_path, out);
    if (sp->parsed()) return cmd_spectra(input_path, out);
    if (vf->parsed()) return cmd_verify();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace specref
