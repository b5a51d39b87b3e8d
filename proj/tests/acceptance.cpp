// Acceptance gate: one [PASS]/[FAIL] line per numbered criterion, exit code =
// number of hard failures. Criterion 7 may print [FLAG] for a tie within two
// normalized points; a flag is not a failure.
//
// Maintenance aid: pass criterion numbers as arguments to run a subset, e.g.
// `acceptance 1 2 11`. The default (no arguments) runs everything, including
// the 25 full training runs behind criteria 5-8 (roughly half an hour).

#include <algorithm>
#include <chrono>
#include <cinttypes>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rllab/harness.hpp"

using namespace rllab;

namespace {

int g_failures = 0;

void report(int n, const std::string& name, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %d: %s (%s)\n", pass ? "PASS" : "FAIL", n, name.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

void report_flag(int n, const std::string& name, const std::string& detail) {
  std::printf("[FLAG] criterion %d: %s (%s)\n", n, name.c_str(), detail.c_str());
  std::fflush(stdout);
}

void progress(const std::string& msg) {
  std::fprintf(stderr, "  .. %s\n", msg.c_str());
  std::fflush(stderr);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// "Never surpassed" sorts behind every real step, and the lower median keeps
// the statistic integer-valued on the evaluation grid.
std::uint64_t lower_median_u64(std::vector<std::uint64_t> v) {
  std::sort(v.begin(), v.end());
  return v[(v.size() - 1) / 2];
}

std::string fmt_step(std::uint64_t s) {
  return s == UINT64_MAX ? std::string("never") : std::to_string(s);
}

double elapsed_s(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// chi-square survival function via the regularized incomplete gamma function
// (series for small x, Lentz continued fraction otherwise)

double gamma_q(double a, double x) {
  if (x < 0.0 || a <= 0.0) throw std::invalid_argument("gamma_q domain");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) {
    double ap = a, sum = 1.0 / a, del = sum;
    for (int i = 0; i < 1000; ++i) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::abs(del) < std::abs(sum) * 1e-15) break;
    }
    return 1.0 - sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
  }
  double b = x + 1.0 - a, c = 1e300, d = 1.0 / b, h = d;
  for (int i = 1; i < 1000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < 1e-300) d = 1e-300;
    c = b + an / c;
    if (std::abs(c) < 1e-300) c = 1e-300;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-15) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

double chi2_survival(double stat, double df) { return gamma_q(df / 2.0, stat / 2.0); }

// ---------------------------------------------------------------------------
// criterion 1: gradient audit

struct GradInstance {
  Agent<double> ag;
  Batch batch;
  Mat<double> sa;
};

// Hidden layers are relu; instances whose pre-activations sit near a kink are
// redrawn so central differences stay trustworthy.
constexpr double kKinkMargin = 1e-3;

GradInstance make_grad_instance(Rng& rng, std::size_t k) {
  static const std::size_t sdims[] = {3, 4, 6};
  static const std::size_t adims[] = {1, 2, 3};
  static const std::size_t hids[] = {8, 12, 16};
  static const std::size_t ncs[] = {2, 3, 5, 4};
  static const std::size_t bs[] = {1, 4, 8};

  AgentConfig acfg;
  acfg.state_dim = sdims[k % 3];
  acfg.action_dim = adims[(k / 3) % 3];
  acfg.hidden = hids[(k / 9) % 3];
  acfg.n_critics = ncs[k % 4];
  acfg.subset_m = std::min<std::size_t>(2, acfg.n_critics);
  acfg.action_bound = 1.0 + 0.5 * static_cast<double>(k % 3);

  for (int attempt = 0; attempt < 512; ++attempt) {
    GradInstance inst{agent_init<double>(acfg, rng.next_u64()), Batch{}, Mat<double>{}};
    Batch& batch = inst.batch;
    batch.b = bs[(k + static_cast<std::size_t>(attempt)) % 3];
    batch.state_dim = acfg.state_dim;
    batch.action_dim = acfg.action_dim;
    for (std::size_t i = 0; i < batch.b * acfg.state_dim; ++i)
      batch.s.push_back(rng.uniform(-1.0, 1.0));
    for (std::size_t i = 0; i < batch.b * acfg.action_dim; ++i)
      batch.a.push_back(rng.uniform(-acfg.action_bound, acfg.action_bound));
    for (std::size_t i = 0; i < batch.b; ++i) {
      batch.r.push_back(rng.uniform(-1.0, 1.0));
      batch.done.push_back(0);
      batch.prov.push_back(Provenance::sample);
    }
    batch.s_next = batch.s;

    Mat<double> s = detail::to_mat<double>(batch.s, batch.b, acfg.state_dim);
    Mat<double> a = detail::to_mat<double>(batch.a, batch.b, acfg.action_dim);
    inst.sa = detail::concat_cols(s, a);
    const Mat<double> a_hat = detail::actor_forward(inst.ag.actor, s, acfg.action_bound);
    const Mat<double> sa_pi = detail::concat_cols(s, a_hat);
    double margin = relu_kink_margin(inst.ag.actor, s);
    for (const auto& c : inst.ag.critics) {
      margin = std::min(margin, relu_kink_margin(c, inst.sa));
      margin = std::min(margin, relu_kink_margin(c, sa_pi));
    }
    if (margin > kKinkMargin) return inst;
  }
  throw NumericError("acceptance: no kink-free gradient instance found");
}

void criterion_gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(20260817);
  double worst = 0.0;
  int instances = 0;
  for (std::size_t k = 0; k < 25; ++k) {
    GradInstance inst = make_grad_instance(rng, k);

    // value-regression loss on one ensemble member
    std::vector<double> y(inst.batch.b);
    for (auto& v : y) v = rng.uniform(-2.0, 2.0);
    const std::size_t ci = k % inst.ag.cfg.n_critics;
    const auto [closs, cgrads] = critic_loss_and_grads(inst.ag, ci, inst.sa, y);
    (void)closs;
    Agent<double> shadow = inst.ag;
    const auto critic_loss = [&](const Mlp<double>& m) {
      shadow.critics[ci] = m;
      return critic_loss_and_grads(shadow, ci, inst.sa, y).first;
    };
    worst = std::max(worst, grad_check<double>(critic_loss, inst.ag.critics[ci], cgrads, 1e-5));
    ++instances;

    // constrained policy loss (ensemble mean plus action-matching penalty)
    static const double lambdas[] = {0.0, 0.3, 1.2};
    const double lambda = lambdas[k % 3];
    const auto [aloss, agrads] = actor_loss_and_grads(inst.ag, inst.batch, lambda);
    (void)aloss;
    const auto actor_loss = [&](const Mlp<double>& m) {
      shadow.actor = m;
      return actor_loss_and_grads(shadow, inst.batch, lambda).first;
    };
    shadow = inst.ag;
    worst = std::max(worst, grad_check<double>(actor_loss, inst.ag.actor, agrads, 1e-5));
    ++instances;
  }
  const double secs = elapsed_s(t0);
  char detail[160];
  std::snprintf(detail, sizeof detail, "%d instances, worst relative error %.3e, %.1fs", instances,
                worst, secs);
  report(1, "gradient audit against central differences", worst <= 1e-6 && instances >= 50 && secs < 30.0,
         detail);
}

// ---------------------------------------------------------------------------
// criterion 2: replay buffer invariants

Trajectory one_step_traj(double r, Rng& rng) {
  Transition t;
  t.s = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
  t.a = {rng.uniform(-1.0, 1.0)};
  t.r = r;
  t.s_next = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
  t.done = true;
  return make_trajectory({t});
}

void criterion_buffers() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(77001);
  bool ok = true;
  std::string why = "ok";

  // (a) + (b): threshold monotone, contents exactly match a shadow multiset
  {
    std::vector<Trajectory> seeds;
    std::multiset<double> model;
    for (int i = 0; i < 4; ++i) {
      const double r = rng.uniform(-5.0, 5.0);
      seeds.push_back(one_step_traj(r, rng));
      model.insert(seeds.back().r_sum);
    }
    const std::size_t cap = 8;
    ExperienceBuffer be(seeds, cap);
    for (int i = 0; ok && i < 10000; ++i) {
      // mix of below-threshold, near-threshold, and clearly-above returns
      const double base = be.r_min();
      double r;
      switch (i % 3) {
        case 0: r = base + rng.uniform(-2.0, 2.0); break;
        case 1: r = base - rng.uniform(0.0, 3.0); break;
        default: r = base + rng.uniform(0.0, 4.0); break;
      }
      const double before = be.r_min();
      const bool admitted = be.maybe_admit(one_step_traj(r, rng));
      if (admitted != (r > before)) {
        ok = false;
        why = "admission decision disagrees with the threshold";
        break;
      }
      if (admitted) {
        model.insert(r);
        if (model.size() > cap) model.erase(model.begin());
      }
      if (be.r_min() < before) {
        ok = false;
        why = "threshold decreased";
        break;
      }
      std::multiset<double> got(be.r_sum_list().begin(), be.r_sum_list().end());
      if (got != model) {
        ok = false;
        why = "resident returns diverged from the shadow model";
        break;
      }
      if (be.r_min() != *model.begin()) {
        ok = false;
        why = "r_min is not the resident minimum";
        break;
      }
      std::size_t n_tr = 0;
      for (const auto& tr : be.trajectories()) n_tr += tr.size();
      if (n_tr != be.n_transitions()) {
        ok = false;
        why = "flat index out of sync";
        break;
      }
    }
  }

  // (c) FIFO residency and order under randomized push sequences
  if (ok) {
    for (const std::size_t cap : {std::size_t{1}, std::size_t{7}, std::size_t{64}}) {
      SampleBuffer bm(cap, 2, 1);
      std::vector<double> pushed;
      const int n_push = 4000;
      for (int i = 0; ok && i < n_push; ++i) {
        Transition t;
        t.s = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
        t.a = {rng.uniform(-1.0, 1.0)};
        t.r = static_cast<double>(i);  // identity stamp
        t.s_next = t.s;
        t.done = rng.uniform(0.0, 1.0) < 0.05;
        bm.push(t);
        pushed.push_back(t.r);
        const std::size_t want = std::min(pushed.size(), cap);
        if (bm.size() != want) {
          ok = false;
          why = "size after push";
          break;
        }
        for (std::size_t j = 0; j < want; ++j) {
          if (bm.r(j) != pushed[pushed.size() - want + j]) {
            ok = false;
            why = "FIFO order broken at capacity " + std::to_string(cap);
            break;
          }
        }
      }
      if (!ok) break;
    }
  }

  const double secs = elapsed_s(t0);
  char detail[160];
  std::snprintf(detail, sizeof detail, "%s, %.1fs", why.c_str(), secs);
  report(2, "replay buffer invariants", ok && secs < 10.0, detail);
}

// ---------------------------------------------------------------------------
// criterion 3: mixed sampler exactness and uniformity

void criterion_sampler() {
  Rng rng(88002);

  // fixtures with identity-stamped rewards
  std::vector<Trajectory> demos;
  int stamp = 0;
  for (int k = 0; k < 4; ++k) {
    std::vector<Transition> ts;
    for (int i = 0; i < 25; ++i) {
      Transition t;
      t.s = {0.0, 0.0};
      t.a = {0.0};
      t.r = stamp++;  // unique over B_e
      t.s_next = {0.0, 0.0};
      t.done = i == 24;
      ts.push_back(std::move(t));
    }
    demos.push_back(make_trajectory(std::move(ts)));
  }
  ExperienceBuffer be(demos, 4);
  const std::size_t n_be = be.n_transitions();

  SampleBuffer bm(400, 2, 1);
  for (int i = 0; i < 400; ++i) {
    Transition t;
    t.s = {0.0, 0.0};
    t.a = {0.0};
    t.r = 100000 + i;  // unique over B_m, disjoint from B_e stamps
    t.s_next = {0.0, 0.0};
    t.done = false;
    bm.push(t);
  }

  bool ok = true;
  std::string why = "ok";

  // exact provenance counts on every draw
  for (const std::size_t b : {std::size_t{4}, std::size_t{64}, std::size_t{256}}) {
    for (const double alpha : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      const auto want_e = static_cast<std::size_t>(std::llround(alpha * static_cast<double>(b)));
      for (int d = 0; ok && d < 200; ++d) {
        const auto batch = mixed_sample(&be, bm, b, alpha, rng);
        if (!batch) {
          ok = false;
          why = "sampler refused a ready buffer";
          break;
        }
        std::size_t ne = 0, nm = 0;
        for (std::size_t i = 0; i < batch->b; ++i) {
          const bool from_e = batch->prov[i] == Provenance::experience;
          (from_e ? ne : nm)++;
          const double r = batch->r[i];
          if (from_e ? !(r >= 0 && r < static_cast<double>(n_be)) : !(r >= 100000))
            ok = false;
        }
        if (ne != want_e || nm != b - want_e) {
          ok = false;
          why = "provenance counts off at b=" + std::to_string(b);
        }
      }
    }
  }

  // chi-square uniformity over both provenance pools, 1e5 draws of b=64
  double p_e = 0.0, p_m = 0.0;
  if (ok) {
    std::vector<std::uint64_t> ce(n_be, 0), cm(400, 0);
    const int draws = 100000;
    for (int d = 0; d < draws; ++d) {
      const auto batch = mixed_sample(&be, bm, 64, 0.5, rng);
      for (std::size_t i = 0; i < batch->b; ++i) {
        if (batch->prov[i] == Provenance::experience)
          ce[static_cast<std::size_t>(batch->r[i])]++;
        else
          cm[static_cast<std::size_t>(batch->r[i]) - 100000]++;
      }
    }
    const auto chi2_p = [](const std::vector<std::uint64_t>& counts) {
      double total = 0.0;
      for (const auto c : counts) total += static_cast<double>(c);
      const double expect = total / static_cast<double>(counts.size());
      double stat = 0.0;
      for (const auto c : counts) {
        const double d = static_cast<double>(c) - expect;
        stat += d * d / expect;
      }
      return chi2_survival(stat, static_cast<double>(counts.size() - 1));
    };
    p_e = chi2_p(ce);
    p_m = chi2_p(cm);
    if (p_e <= 0.01 || p_m <= 0.01) {
      ok = false;
      why = "uniformity rejected";
    }
  }

  char detail[160];
  std::snprintf(detail, sizeof detail, "%s; uniformity p = %.3f and %.3f", why.c_str(), p_e, p_m);
  report(3, "mixed sampler exactness and uniformity", ok, detail);
}

// ---------------------------------------------------------------------------
// criterion 4: ensemble properties

void criterion_ensemble() {
  Rng rng(99003);
  AgentConfig acfg;
  acfg.state_dim = 3;
  acfg.action_dim = 2;
  acfg.hidden = 8;
  acfg.n_critics = 5;
  acfg.subset_m = 2;
  acfg.action_bound = 1.3;

  bool ok = true;
  std::string why = "ok";
  Agent<double> ag = agent_init<double>(acfg, rng.next_u64());
  for (int c = 0; ok && c < 10000; ++c) {
    if (c % 500 == 0) ag = agent_init<double>(acfg, rng.next_u64());
    std::vector<double> s(acfg.state_dim), a(acfg.action_dim);
    for (auto& v : s) v = rng.uniform(-2.0, 2.0);
    for (auto& v : a) v = rng.uniform(-acfg.action_bound, acfg.action_bound);

    // per-member target values via the raw forward pass
    std::vector<double> member_q(acfg.n_critics);
    Mat<double> sa(1, s.size() + a.size());
    for (std::size_t i = 0; i < s.size(); ++i) sa.v[i] = s[i];
    for (std::size_t i = 0; i < a.size(); ++i) sa.v[s.size() + i] = a[i];
    for (std::size_t i = 0; i < acfg.n_critics; ++i)
      member_q[i] = mlp_forward(ag.critic_targets_[i], sa).v[0];

    const auto subset = draw_subset(acfg.n_critics, acfg.subset_m, rng);
    const double tq = target_q<double>(ag, s, a, subset);
    double subset_min = std::numeric_limits<double>::infinity();
    for (const std::size_t i : subset) {
      if (tq > member_q[i] + 1e-12) {
        ok = false;
        why = "target exceeds a subset member";
      }
      subset_min = std::min(subset_min, member_q[i]);
    }
    if (tq != subset_min) {
      ok = false;
      why = "target is not the subset minimum";
    }

    std::vector<std::size_t> all(acfg.n_critics);
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    if (target_q<double>(ag, s, a, all) !=
        *std::min_element(member_q.begin(), member_q.end())) {
      ok = false;
      why = "full subset is not the global minimum";
    }

    // actor objective stays inside the online ensemble envelope
    Mat<double> sm(1, s.size());
    std::copy(s.begin(), s.end(), sm.v.begin());
    const Mat<double> pa = detail::actor_forward(ag.actor, sm, acfg.action_bound);
    std::vector<double> pav(pa.v.begin(), pa.v.end());
    std::vector<double> online_q(acfg.n_critics);
    Mat<double> sap(1, s.size() + pav.size());
    for (std::size_t i = 0; i < s.size(); ++i) sap.v[i] = s[i];
    for (std::size_t i = 0; i < pav.size(); ++i) sap.v[s.size() + i] = pav[i];
    for (std::size_t i = 0; i < acfg.n_critics; ++i)
      online_q[i] = mlp_forward(ag.critics[i], sap).v[0];
    const double qm = actor_q_mean<double>(ag, s, pav);
    const double lo = *std::min_element(online_q.begin(), online_q.end());
    const double hi = *std::max_element(online_q.begin(), online_q.end());
    if (qm < lo - 1e-9 || qm > hi + 1e-9) {
      ok = false;
      why = "ensemble mean escaped the min/max envelope";
    }
  }
  report(4, "ensemble minimum and mean properties", ok, why);
}

// ---------------------------------------------------------------------------
// criteria 5-8: behavioral reproduction suite (25 training runs, shared)

struct SweepSettings {
  std::uint64_t total_steps = 50000;
  std::size_t batch_size = 64;
  std::uint64_t eval_interval = 1000;
  std::size_t eval_episodes = 10;
  std::uint64_t warmup_steps = 1000;
  // The constraint-decay horizon is the knob the method wants tuned per
  // environment; on PointMass2D a short horizon releases the policy once the
  // replay buffer holds real data instead of anchoring it to warmup actions.
  std::uint64_t lambda_horizon = 1500;
};

struct Family {
  std::string label;
  Variant variant = Variant::asilfd;
  std::string demo_path;
  double alpha = 0.25;
  std::vector<TrainResult> runs;  // seeds 1..5
  double max_run_secs = 0.0;
};

struct Sweep {
  double threshold = 0.0;  // imperfect-demo mean return
  double r_rand = 0.0, r_expert = 0.0;
  std::map<std::string, Family> families;
  bool ready = false;
};

Sweep g_sweep;

double normalized(const Sweep& sw, double r) {
  return (r - sw.r_rand) / (sw.r_expert - sw.r_rand);
}

void run_sweep(const std::filesystem::path& root) {
  if (g_sweep.ready) return;
  const SweepSettings ss;
  const EnvSpec spec = env_spec(EnvId::point_mass);

  const auto exp_path = (root / "demos_expert.txt").string();
  const auto imp_path = (root / "demos_imperfect.txt").string();
  const auto exp_demos =
      collect_demos(spec, default_controller(EnvId::point_mass, ControllerKind::expert), 4, 7);
  save_trajectories(exp_path, {EnvId::point_mass, spec.state_dim, spec.action_dim, exp_demos});
  const auto imp_demos =
      collect_demos(spec, default_controller(EnvId::point_mass, ControllerKind::imperfect), 4, 11);
  save_trajectories(imp_path, {EnvId::point_mass, spec.state_dim, spec.action_dim, imp_demos});

  double thr = 0.0;
  for (const auto& t : imp_demos) thr += t.r_sum;
  g_sweep.threshold = thr / static_cast<double>(imp_demos.size());

  Rng rrng(123);
  PolicyFn rand_pi = [&](std::span<const double>) {
    std::vector<double> a(spec.action_dim);
    for (auto& x : a) x = rrng.uniform(-spec.action_bound, spec.action_bound);
    return a;
  };
  g_sweep.r_rand = evaluate(rand_pi, spec, 50, 123);
  const ControllerSpec expert = default_controller(EnvId::point_mass, ControllerKind::expert);
  Rng erng(7);
  PolicyFn exp_pi = [&](std::span<const double> s) {
    EnvState st;
    st.x.assign(s.begin(), s.end());
    return controller_act(expert, spec, st, erng);
  };
  g_sweep.r_expert = evaluate(exp_pi, spec, 50, 123);
  progress("baselines: random " + std::to_string(g_sweep.r_rand) + ", expert " +
           std::to_string(g_sweep.r_expert) + ", threshold " + std::to_string(g_sweep.threshold));

  const Family blueprints[] = {
      {"asilfd_imperfect", Variant::asilfd, imp_path, 0.25, {}, 0.0},
      {"td3_scratch", Variant::td3, "", 0.25, {}, 0.0},
      {"asilfd_expert", Variant::asilfd, exp_path, 0.25, {}, 0.0},
      {"no_constraint", Variant::asilfd_noconstraint, imp_path, 0.25, {}, 0.0},
      {"mix_ratio_zero", Variant::asilfd, imp_path, 0.0, {}, 0.0},
  };
  for (const Family& bp : blueprints) {
    Family fam = bp;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      TrainConfig c;
      c.env = EnvId::point_mass;
      c.variant = fam.variant;
      c.total_steps = ss.total_steps;
      c.batch_size = ss.batch_size;
      c.alpha = fam.alpha;
      c.eval_interval = ss.eval_interval;
      c.eval_episodes = ss.eval_episodes;
      c.warmup_steps = ss.warmup_steps;
      c.lambda_horizon = ss.lambda_horizon;
      c.seed = seed;
      c.demo_path = fam.demo_path;
      c.out_dir = (root / (fam.label + "_s" + std::to_string(seed))).string();
      const auto t0 = std::chrono::steady_clock::now();
      fam.runs.push_back(train(c));
      const double secs = elapsed_s(t0);
      fam.max_run_secs = std::max(fam.max_run_secs, secs);
      progress(fam.label + " seed " + std::to_string(seed) + ": final " +
               std::to_string(fam.runs.back().final_eval) + " in " + std::to_string(secs) + "s");
    }
    g_sweep.families[fam.label] = std::move(fam);
  }
  g_sweep.ready = true;
}

std::vector<double> final_returns(const Family& fam) {
  std::vector<double> v;
  for (const auto& r : fam.runs) v.push_back(r.final_eval);
  return v;
}

void criterion_sample_efficiency(const std::filesystem::path& root) {
  run_sweep(root);
  const Family& asilfd = g_sweep.families.at("asilfd_imperfect");
  const Family& td3 = g_sweep.families.at("td3_scratch");

  const auto surpass_list = [&](const Family& fam) {
    std::vector<std::uint64_t> v;
    for (const auto& r : fam.runs) {
      const auto s = surpass_step(r.rows, g_sweep.threshold);
      v.push_back(s ? *s : UINT64_MAX);
    }
    return v;
  };
  const std::uint64_t med_a = lower_median_u64(surpass_list(asilfd));
  const std::uint64_t med_t = lower_median_u64(surpass_list(td3));

  // peak normalized score within the step budget, median across seeds
  std::vector<double> peaks;
  for (const auto& r : asilfd.runs) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& row : r.rows)
      if (std::isfinite(row.eval_return)) best = std::max(best, row.eval_return);
    peaks.push_back(normalized(g_sweep, best));
  }
  const double med_peak = median(peaks);

  const double slowest = std::max(asilfd.max_run_secs, td3.max_run_secs);
  const bool pass = med_a < med_t && med_peak >= 0.95 && slowest < 600.0;
  char detail[200];
  std::snprintf(detail, sizeof detail,
                "median steps-to-demo-return %s vs %s from scratch; median peak score %.3f; "
                "slowest run %.0fs",
                fmt_step(med_a).c_str(), fmt_step(med_t).c_str(), med_peak, slowest);
  report(5, "demo-seeded sample efficiency", pass, detail);
}

void criterion_imperfect_robustness(const std::filesystem::path& root) {
  run_sweep(root);
  const double m_imp = median(final_returns(g_sweep.families.at("asilfd_imperfect")));
  const double m_exp = median(final_returns(g_sweep.families.at("asilfd_expert")));
  const double n_imp = normalized(g_sweep, m_imp);
  const double n_exp = normalized(g_sweep, m_exp);
  const bool pass = n_imp >= 0.95 * n_exp;
  char detail[160];
  std::snprintf(detail, sizeof detail,
                "median final score %.3f with imperfect demos vs %.3f with expert demos", n_imp,
                n_exp);
  report(6, "imperfect-demonstration robustness", pass, detail);
}

void criterion_constraint_ablation(const std::filesystem::path& root) {
  run_sweep(root);
  const double m_with = median(final_returns(g_sweep.families.at("asilfd_imperfect")));
  const double m_without = median(final_returns(g_sweep.families.at("no_constraint")));
  const double n_with = normalized(g_sweep, m_with);
  const double n_without = normalized(g_sweep, m_without);
  char detail[160];
  std::snprintf(detail, sizeof detail, "median final score %.3f with constraint vs %.3f without",
                n_with, n_without);
  if (m_with >= m_without) {
    report(7, "policy-constraint ablation", true, detail);
  } else if (n_without - n_with <= 0.02) {
    report_flag(7, "policy-constraint ablation: tie within two normalized points", detail);
  } else {
    report(7, "policy-constraint ablation", false, detail);
  }
}

void criterion_mix_ratio(const std::filesystem::path& root) {
  run_sweep(root);
  const double m_mix = median(final_returns(g_sweep.families.at("asilfd_imperfect")));
  const double m_zero = median(final_returns(g_sweep.families.at("mix_ratio_zero")));
  char detail[160];
  std::snprintf(detail, sizeof detail,
                "median final return %.3f at mix 0.25 vs %.3f at mix 0 (scores %.3f vs %.3f)",
                m_mix, m_zero, normalized(g_sweep, m_mix), normalized(g_sweep, m_zero));
  report(8, "demonstration mix-ratio ablation", m_mix > m_zero, detail);
}

// ---------------------------------------------------------------------------
// criterion 9: behavior-cloning pretrain

void criterion_bc(const std::filesystem::path& root) {
  const EnvSpec spec = env_spec(EnvId::point_mass);
  const auto demos =
      collect_demos(spec, default_controller(EnvId::point_mass, ControllerKind::expert), 4, 7);
  (void)root;

  bool mse_ok = true;
  std::vector<double> before, after;
  double worst_ratio = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    AgentConfig acfg;
    acfg.state_dim = spec.state_dim;
    acfg.action_dim = spec.action_dim;
    acfg.hidden = 64;
    acfg.n_critics = 2;
    acfg.subset_m = 2;
    acfg.action_bound = spec.action_bound;
    Agent<double> ag = agent_init<double>(acfg, seed);

    const auto rollout = [&](const Agent<double>& a) {
      Rng dummy(0);
      PolicyFn pi = [&](std::span<const double> s) {
        return select_action(a, s, ExplorationNoise{0.0, 0.0}, dummy);
      };
      return evaluate(pi, spec, 5, 900 + seed);
    };
    before.push_back(rollout(ag));
    const BcReport rep = bc_pretrain(ag, demos, 2000, 1e-3);
    after.push_back(rollout(ag));
    worst_ratio = std::max(worst_ratio, rep.final_mse / rep.initial_mse);
    if (rep.final_mse > rep.initial_mse / 10.0) mse_ok = false;
  }
  const double med_before = median(before), med_after = median(after);
  char detail[160];
  std::snprintf(detail, sizeof detail,
                "worst final/initial MSE ratio %.4f; median rollout %.1f before vs %.1f after",
                worst_ratio, med_before, med_after);
  report(9, "behavior-cloning pretrain", mse_ok && med_after > med_before, detail);
}

// ---------------------------------------------------------------------------
// criterion 10: bitwise determinism across all variants

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void criterion_determinism(const std::filesystem::path& root) {
  const EnvSpec spec = env_spec(EnvId::point_mass);
  const auto demo_path = (root / "determinism_demos.txt").string();
  const auto demos =
      collect_demos(spec, default_controller(EnvId::point_mass, ControllerKind::expert), 3, 7);
  save_trajectories(demo_path, {EnvId::point_mass, spec.state_dim, spec.action_dim, demos});

  const Variant variants[] = {Variant::asilfd, Variant::asilfd_noconstraint, Variant::td3,
                              Variant::redq,   Variant::redq_bc,             Variant::redq_lfd};
  bool ok = true;
  std::string why = "all variants byte-identical";
  for (const Variant v : variants) {
    const bool needs_demos =
        v == Variant::asilfd || v == Variant::asilfd_noconstraint || v == Variant::redq_bc ||
        v == Variant::redq_lfd;
    std::string first;
    for (int rep = 0; rep < 2; ++rep) {
      TrainConfig c;
      c.env = EnvId::point_mass;
      c.variant = v;
      c.total_steps = 1500;
      c.batch_size = 32;
      c.n_critics = 3;
      c.subset_m = 2;
      c.hidden = 16;
      c.warmup_steps = 600;
      c.eval_interval = 500;
      c.eval_episodes = 2;
      c.bc_epochs = 100;
      c.seed = 9;
      c.demo_path = needs_demos ? demo_path : "";
      c.out_dir =
          (root / ("det_" + to_string(v) + "_rep" + std::to_string(rep))).string();
      const TrainResult res = train(c);
      const std::string bytes = slurp(res.out_dir + "/metrics.csv");
      if (rep == 0)
        first = bytes;
      else if (bytes != first || bytes.empty()) {
        ok = false;
        why = "metrics differ for variant " + to_string(v);
      }
    }
    if (!ok) break;
  }
  report(10, "bitwise determinism across variants", ok, why);
}

// ---------------------------------------------------------------------------
// criterion 11: value-estimate diagnostic on the chain fixture

void criterion_diagnostic() {
  // five-state deterministic chain with power-of-two rewards; state 4 absorbs
  constexpr double kRewards[4] = {1.0, 0.5, 0.25, 0.125};
  const double gamma = 0.5;

  double v_dp[5];
  v_dp[4] = 0.0;
  for (int i = 3; i >= 0; --i) v_dp[i] = kRewards[i] + gamma * v_dp[i + 1];

  DiagModel model;
  model.step = [&](std::span<const double> s) {
    const int i = static_cast<int>(s[0]);
    const int j = std::min(i + 1, 4);
    return std::pair<std::vector<double>, double>({static_cast<double>(j)},
                                                  i < 4 ? kRewards[i] : 0.0);
  };
  model.qvalue = [&](std::span<const double> s) { return v_dp[static_cast<int>(s[0])]; };

  std::vector<std::vector<double>> states;
  for (int i = 0; i < 5; ++i) states.push_back({static_cast<double>(i)});

  bool ok = true;
  std::string why;
  for (const std::size_t horizon : {std::size_t{3}, std::size_t{12}}) {
    const QErrorReport rep = q_error_mean(model, states, gamma, horizon);
    const double bound = std::pow(gamma, static_cast<double>(horizon)) * rep.r_max + 1e-6;
    char buf[120];
    std::snprintf(buf, sizeof buf, "horizon %zu: error %.3e vs bound %.3e; ", horizon,
                  rep.mean_abs_error, bound);
    why += buf;
    if (!(rep.mean_abs_error <= bound)) ok = false;
    // with the whole chain inside the horizon the rollouts are bit-exact
    if (horizon == 12 && rep.mean_abs_error != 0.0) {
      ok = false;
      why += "long-horizon rollouts not exact; ";
    }
  }
  report(11, "value-estimate diagnostic on the chain fixture", ok, why);
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  const auto wanted = [&](int n) { return only.empty() || only.count(n) > 0; };

  const std::filesystem::path root = std::filesystem::current_path() / "acceptance_runs";
  std::filesystem::remove_all(root);
  std::filesystem::create_directories(root);

  try {
    if (wanted(1)) criterion_gradients();
    if (wanted(2)) criterion_buffers();
    if (wanted(3)) criterion_sampler();
    if (wanted(4)) criterion_ensemble();
    if (wanted(5)) criterion_sample_efficiency(root);
    if (wanted(6)) criterion_imperfect_robustness(root);
    if (wanted(7)) criterion_constraint_ablation(root);
    if (wanted(8)) criterion_mix_ratio(root);
    if (wanted(9)) criterion_bc(root);
    if (wanted(10)) criterion_determinism(root);
    if (wanted(11)) criterion_diagnostic();
  } catch (const std::exception& e) {
    std::printf("[FAIL] acceptance aborted: %s\n", e.what());
    return 99;
  }
  if (g_failures == 0) std::printf("all criteria passed\n");
  return g_failures;
}
