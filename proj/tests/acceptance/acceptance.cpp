// SPDX-License-Identifier: Apache-2.0
//
// Acceptance checks. Prints one PASS/FAIL/SKIP line per criterion and exits
// nonzero if any criterion fails. Arguments select a subset by number.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "rddc/baselines.hpp"
#include "rddc/commands.hpp"
#include "rddc/loss.hpp"
#include "rddc/metrics.hpp"
#include "rddc/nn.hpp"
#include "support/check.hpp"

using namespace rddc;
using namespace rddc::testing;

namespace {

struct Outcome {
  enum class Status { pass, fail, skip } status;
  std::string detail;
};

Outcome pass_if(bool ok, std::string detail) {
  return {ok ? Outcome::Status::pass : Outcome::Status::fail, std::move(detail)};
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::filesystem::path scratch(const std::string& name) {
  std::filesystem::path dir = std::filesystem::path(RDDC_ACCEPTANCE_TMP) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

PaddedBatch random_batch(std::size_t n, std::size_t t_max, std::size_t d, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> len(1, t_max);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<std::vector<double>> rows(n);
  std::vector<std::size_t> lengths(n);
  for (std::size_t i = 0; i < n; ++i) {
    lengths[i] = len(rng);
    rows[i].resize(lengths[i] * d);
    for (double& v : rows[i]) v = g(rng);
  }
  return PaddedBatch::pack(rows, lengths, d);
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

Tensor one_hot(const std::vector<int>& labels, std::size_t k) {
  std::vector<double> v(labels.size() * k, 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) v[i * k + static_cast<std::size_t>(labels[i])] = 1.0;
  return Tensor({labels.size(), k}, v);
}

struct Terms {
  double l1, l2, l3;
};

Terms terms(const Tensor& h, const Tensor& a) {
  KernelMatrix k = kernel_matrix(h, median_sigma(h));
  return {l1(a, k).item(), l2(a).item(), l3(a, k).item()};
}

Tensor permute_rows(const Tensor& x, const std::vector<std::size_t>& perm) {
  std::vector<long> index(perm.begin(), perm.end());
  return gather_rows(x, index);
}

Tensor permute_cols(const Tensor& x, const std::vector<std::size_t>& perm) {
  return transpose(permute_rows(transpose(x), perm));
}

// 1. Finite-difference agreement for every op and for the loss through the model.
Outcome gradients() {
  auto start = Clock::now();
  std::mt19937_64 rng(101);
  double worst_op = 0.0;
  std::string worst_name;
  for (int trial = 0; trial < 3; ++trial) {
    Tensor x = random_tensor({3, 4}, rng), y = random_tensor({3, 4}, rng), s = random_tensor({1}, rng);
    Tensor pos = random_tensor({3, 4}, rng, 0.5, 2.0), w = random_tensor({3, 4}, rng);
    auto weighted = [&](const Tensor& t) { return sum(mul(t, w)); };
    std::vector<long> index{2, 0, 2, 1};
    std::vector<bool> take{true, false, true};
    std::vector<std::pair<const char*, std::function<Tensor()>>> ops = {
        {"add", [&] { return weighted(add(x, y)); }},
        {"sub", [&] { return weighted(sub(x, y)); }},
        {"mul", [&] { return weighted(mul(x, y)); }},
        {"div", [&] { return weighted(div(x, pos)); }},
        {"scalar broadcast", [&] { return weighted(mul(s, add(x, s))); }},
        {"neg", [&] { return weighted(neg(x)); }},
        {"exp", [&] { return weighted(exp(x)); }},
        {"sqrt", [&] { return weighted(sqrt(pos)); }},
        {"tanh", [&] { return weighted(tanh(x)); }},
        {"sigmoid", [&] { return weighted(sigmoid(x)); }},
        {"square", [&] { return weighted(square(x)); }},
        {"relu", [&] { return weighted(relu(x)); }},
        {"sum", [&] { return sum(x); }},
        {"mean", [&] { return mean(mul(x, w)); }},
        {"sum axis", [&] { return sum(mul(sum(x, 0), Tensor::from_vector({1, -2, 3, 0.5}))); }},
        {"mean axis", [&] { return sum(mul(mean(x, 1), Tensor::from_vector({1, -2, 3}))); }},
        {"transpose", [&] { return sum(mul(transpose(x), transpose(w))); }},
        {"matmul", [&] { return weighted(matmul(x, matmul(transpose(y), pos))); }},
        {"concat", [&] { return sum(mul(concat({x, y}, 1), concat({w, neg(w)}, 1))); }},
        {"reshape", [&] { return sum(mul(reshape(x, Shape{4, 3}), reshape(w, Shape{4, 3}))); }},
        {"slice_rows", [&] { return sum(mul(slice_rows(x, 1, 2), slice_rows(w, 0, 2))); }},
        {"gather_rows", [&] { return sum(mul(gather_rows(x, index), concat({w, slice_rows(w, 0, 1)}, 0))); }},
        {"select_rows", [&] { return weighted(select_rows(take, x, y)); }},
        {"broadcast_rows", [&] { return weighted(broadcast_rows(reshape(slice_rows(x, 0, 1), Shape{4}), 3)); }},
        {"broadcast_cols",
         [&] { return weighted(broadcast_cols(reshape(slice_rows(transpose(x), 0, 1), Shape{3}), 4)); }},
        {"diagonal", [&] { return sum(mul(diagonal(matmul(x, transpose(y))), Tensor::from_vector({1, 2, 3}))); }},
        {"triu_sum", [&] { return triu_sum(matmul(x, transpose(w))); }},
        {"sq_dists", [&] { return sum(mul(sq_dists(x, y), matmul(w, transpose(w)))); }},
        {"softmax_rows", [&] { return weighted(softmax_rows(x)); }},
        {"kernel_matrix", [&] { return sum(mul(kernel_matrix(x, 1.3).k, matmul(w, transpose(w)))); }},
        {"l1", [&] { return l1(softmax_rows(y), kernel_matrix(x, 1.1)); }},
        {"l2", [&] { return l2(softmax_rows(y)); }},
        {"simplex_matrix", [&] { return weighted(simplex_matrix(softmax_rows(y))); }},
        {"l3", [&] { return l3(softmax_rows(y), kernel_matrix(x, 0.9)); }},
    };
    for (auto& [name, f] : ops) {
      double e = gradcheck(f, {x, y, s, pos}).max_rel;
      if (e > worst_op) {
        worst_op = e;
        worst_name = name;
      }
    }
  }

  ModelConfig mc;
  mc.input_size = 2;
  mc.gru_units = 5;
  mc.fc1_units = 6;
  mc.clusters = 2;
  RddcModel model = RddcModel::init(mc, 7);
  PaddedBatch batch = random_batch(6, 8, 2, rng);
  const double sigma = median_sigma(model.forward(batch, Mode::train).h);
  GradReport full = gradcheck(
      [&] {
        ForwardResult r = model.forward(batch, Mode::train);
        return total_loss(r.h, r.alpha, {}, sigma).total;
      },
      model.parameters());

  double t = seconds_since(start);
  bool ok = worst_op <= 1e-4 && full.max_rel <= 1e-4 && t < 60.0;
  return pass_if(ok, fmt::format("worst op rel err {:.2e} ({}), full model rel err {:.2e} over {} params, {:.1f} s",
                                 worst_op, worst_name, full.max_rel, full.checked, t));
}

// 2. Bounds and permutation invariance of the loss terms.
Outcome loss_bounds() {
  auto start = Clock::now();
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<std::size_t> kd(2, 5), nd(4, 50), dd(1, 6);
  std::uniform_real_distribution<double> spread(0.2, 6.0);
  std::size_t violations = 0;
  double worst_perm = 0.0;
  const int instances = 1000;
  for (int it = 0; it < instances; ++it) {
    const std::size_t k = kd(rng), n = nd(rng), d = dd(rng);
    Tensor h = random_tensor({n, d}, rng);
    Tensor a({n, k}, random_simplex_rows(n, k, rng, spread(rng)));
    Terms base = terms(h, a);
    const double bound = (static_cast<double>(k) - 1.0) / 2.0 + 1e-6;
    if (!(base.l1 >= 0.0 && base.l1 <= bound && base.l3 >= 0.0 && base.l3 <= bound && base.l2 >= 0.0)) ++violations;

    std::vector<std::size_t> rows(n), cols(k);
    std::iota(rows.begin(), rows.end(), 0);
    std::iota(cols.begin(), cols.end(), 0);
    std::shuffle(rows.begin(), rows.end(), rng);
    std::shuffle(cols.begin(), cols.end(), rng);
    Terms by_row = terms(permute_rows(h, rows), permute_rows(a, rows));
    Terms by_col = terms(h, permute_cols(a, cols));
    for (const Terms& p : {by_row, by_col})
      worst_perm = std::max({worst_perm, std::abs(p.l1 - base.l1), std::abs(p.l2 - base.l2), std::abs(p.l3 - base.l3)});
  }
  double t = seconds_since(start);
  bool ok = violations == 0 && worst_perm <= 1e-12 && t < 60.0;
  return pass_if(ok, fmt::format("{} instances, {} bound violations, max permutation change {:.2e}, {:.1f} s",
                                 instances, violations, worst_perm, t));
}

// 3. Library terms against direct summation; ACC against enumeration.
Outcome oracles() {
  std::mt19937_64 rng(303);
  std::uniform_int_distribution<std::size_t> kd(2, 5), nd(4, 30), dd(1, 4);
  double worst = 0.0;
  for (int it = 0; it < 100; ++it) {
    const std::size_t k = kd(rng), n = nd(rng), d = dd(rng);
    Tensor h = random_tensor({n, d}, rng);
    std::vector<double> av = random_simplex_rows(n, k, rng);
    Tensor a({n, k}, av);
    const double sigma = median_sigma(h);
    std::vector<double> hv(h.data().begin(), h.data().end());
    std::vector<double> kern = ref_kernel(hv, n, d, sigma);
    double ref1 = ref_cs_pair_sum(av, n, k, kern);
    double ref3 = ref_cs_pair_sum(ref_simplex(av, n, k), n, k, kern);
    KernelMatrix km = kernel_matrix(h, sigma);
    worst = std::max({worst, std::abs(l1(a, km).item() - ref1), std::abs(l3(a, km).item() - ref3)});
  }
  std::size_t acc_mismatch = 0;
  for (int it = 0; it < 100; ++it) {
    const std::size_t k = kd(rng);
    std::uniform_int_distribution<int> label(0, static_cast<int>(k) - 1);
    std::size_t n = nd(rng);
    std::vector<int> truth(n), pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      truth[i] = label(rng);
      pred[i] = label(rng);
    }
    if (acc({truth, pred, k, k}) != brute_force_acc(truth, pred, k)) ++acc_mismatch;
  }
  return pass_if(worst <= 1e-12 && acc_mismatch == 0,
                 fmt::format("max |L - oracle| {:.2e} over 100 instances, {} ACC mismatches in 100", worst,
                             acc_mismatch));
}

// 4. Closed-form values.
Outcome anchors() {
  std::mt19937_64 rng(404);
  double uniform_err = 0.0;
  for (std::size_t k = 2; k <= 5; ++k) {
    std::normal_distribution<double> g(0.0, 0.05);
    std::vector<double> hv;
    for (std::size_t i = 0; i < 20; ++i) {
      hv.push_back(static_cast<double>(i % 2) * 10.0 + g(rng));
      hv.push_back(g(rng));
    }
    Tensor h({20, 2}, hv);
    Tensor uniform = Tensor::full({20, k}, 1.0 / static_cast<double>(k));
    double v = l1(uniform, kernel_matrix(h, median_sigma(h))).item();
    uniform_err = std::max(uniform_err, std::abs(v - (static_cast<double>(k) - 1.0) / 2.0));
  }
  Tensor hard = one_hot({0, 1, 2, 0, 1, 2, 2}, 3);
  double l2_raw = l2(hard, false).item();
  Tensor m = simplex_matrix(hard);
  double corner_err = 0.0;
  for (std::size_t l = 0; l < 7; ++l)
    for (std::size_t i = 0; i < 3; ++i)
      if (hard(l, i) == 0.0) corner_err = std::max(corner_err, std::abs(m(l, i) - std::exp(-2.0)));
  double sigma = median_sigma(Tensor({3, 1}, {0.0, 1.0, 3.0}));
  bool ok = uniform_err <= 1e-9 && l2_raw == 0.0 && corner_err <= 1e-12 && sigma == 0.3;
  return pass_if(ok, fmt::format("uniform L1 err {:.2e}, hard L2 raw {}, off-corner err {:.2e}, sigma {}",
                                 uniform_err, l2_raw, corner_err, sigma));
}

// 5. Extra zero padding never changes the encoder output.
Outcome masking() {
  std::mt19937_64 rng(505);
  std::uniform_int_distribution<std::size_t> nd(1, 8), td(1, 15), dd(1, 4), ud(1, 8), extra(1, 12);
  double worst = 0.0;
  for (int it = 0; it < 500; ++it) {
    const std::size_t d = dd(rng);
    Rng init(rng());
    BiGruEncoder enc = BiGruEncoder::init(d, ud(rng), init);
    PaddedBatch b = random_batch(nd(rng), td(rng), d, rng);
    worst = std::max(worst, max_abs_diff(encode_batch(enc, b), encode_batch(enc, b.with_extra_padding(extra(rng)))));
  }
  return pass_if(worst <= 1e-12, fmt::format("500 batches, max change {:.2e}", worst));
}

ExperimentConfig sinusoid_experiment(const std::vector<double>& frequencies, const std::string& name) {
  ExperimentConfig c;
  SynthSpec spec;
  for (double f : frequencies) spec.classes.push_back({f, 1.0, 0.2});
  spec.dim = 2;
  spec.min_length = 20;
  spec.max_length = 40;
  spec.per_class = 100;
  c.synth = spec;
  c.train.restarts = 10;
  c.train.epochs = 100;
  c.train.jobs = 1;
  apply_seed(c, 2024);
  c.out_dir = scratch(name);
  return c;
}

// 6. Two-class synthetic clustering.
Outcome two_class() {
  auto start = Clock::now();
  ExperimentConfig c = sinusoid_experiment({1.0, 3.0}, "two-class");
  TrainReport r = cmd_train(c);
  double t = seconds_since(start);
  double a = r.test.acc.value_or(0.0), n = r.test.nmi.value_or(0.0);
  return pass_if(a >= 0.95 && n >= 0.7 && t < 900.0,
                 fmt::format("test ACC {:.3f}, NMI {:.3f} (n_test {}), {:.0f} s", a, n, r.n_test, t));
}

// 7. Three-class synthetic clustering against k-means on cropped/averaged vectors.
Outcome three_class() {
  auto start = Clock::now();
  ExperimentConfig c = sinusoid_experiment({1.0, 2.0, 4.0}, "three-class");
  TrainReport r = cmd_train(c);
  c.baseline_methods = {BaselineMethod::kmeans};
  c.vectorizations = {Vectorization::crop, Vectorization::time_avg};
  c.out_dir = scratch("three-class-kmeans");
  BaselineReport b = cmd_baseline(c);
  double a = r.test.acc.value_or(0.0);
  bool ok = a >= 0.85;
  std::string detail = fmt::format("RDDC test ACC {:.3f}", a);
  for (const auto& row : b.rows) {
    ok = ok && a >= row.acc - 0.02;
    detail += fmt::format(", k-means ({}) {:.3f}", to_string(row.vectorization), row.acc);
  }
  return pass_if(ok, detail + fmt::format(", {:.0f} s", seconds_since(start)));
}

// 8. k-means and Ward on time-averaged blob sequences.
Outcome baseline_sanity() {
  std::mt19937_64 rng(808);
  std::normal_distribution<double> centre(0.0, 0.5), step(0.0, 0.3);
  std::uniform_int_distribution<std::size_t> len(5, 15);
  const double centers[3][2] = {{0.0, 0.0}, {8.0, 0.0}, {0.0, 8.0}};
  Dataset ds;
  ds.dim = 2;
  std::vector<int> labels;
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < 50; ++i) {
      Sequence s;
      s.id = fmt::format("blob{}-{}", c, i);
      s.label = static_cast<int>(c);
      s.dim = 2;
      double cx = centers[c][0] + centre(rng), cy = centers[c][1] + centre(rng);
      for (std::size_t t = len(rng); t > 0; --t) {
        s.values.push_back(cx + step(rng));
        s.values.push_back(cy + step(rng));
      }
      labels.push_back(static_cast<int>(c));
      ds.sequences.push_back(std::move(s));
    }
  Matrix x = vectorize(ds, Vectorization::time_avg);
  KMeansResult km = kmeans(x, 3, {10, 300, 8});
  WardResult ward = ward_hc(x, 3);
  double km_acc = acc({labels, km.assignments, 3, 3}), ward_acc = acc({labels, ward.assignments, 3, 3});
  // Over-clustered fits need several Lloyd updates, which makes the trace check bite.
  std::size_t increases = 0, steps = 0, runs = 0;
  for (std::size_t k = 3; k <= 6; ++k) {
    KMeansResult fit = k == 3 ? km : kmeans(x, k, {10, 300, 8 + k});
    for (const auto& trace : fit.inertia_traces) {
      ++runs;
      steps += trace.size();
      for (std::size_t t = 1; t < trace.size(); ++t)
        if (trace[t] > trace[t - 1]) ++increases;
    }
  }
  return pass_if(km_acc >= 0.99 && ward_acc >= 0.99 && increases == 0,
                 fmt::format("k-means ACC {:.3f}, Ward ACC {:.3f}, {} inertia increases over {} Lloyd updates in {} runs",
                             km_acc, ward_acc, increases, steps, runs));
}

// 9. Same config and seed, same metrics bytes.
Outcome determinism() {
  auto make = [](const std::string& name) {
    ExperimentConfig c;
    SynthSpec spec;
    spec.classes = {{1.0, 1.0, 0.2}, {3.0, 1.0, 0.2}};
    spec.dim = 2;
    spec.per_class = 30;
    c.synth = spec;
    c.gru_units = 8;
    c.fc1_units = 8;
    c.train.restarts = 3;
    c.train.epochs = 10;
    c.train.batch_size = 16;
    c.train.jobs = 2;
    apply_seed(c, 99);
    c.out_dir = scratch(name);
    return c;
  };
  TrainReport a = cmd_train(make("determinism-a")), b = cmd_train(make("determinism-b"));
  std::string ma = slurp(a.metrics_path), mb = slurp(b.metrics_path);
  return pass_if(!ma.empty() && ma == mb, fmt::format("metrics files {} ({} bytes)",
                                                      ma == mb ? "identical" : "differ", ma.size()));
}

// 10. Optional real-data run on a converted character-trajectory subset.
Outcome character_trajectories() {
  const char* path = std::getenv("RDDC_CHARTRAJ_PATH");
  if (path == nullptr || *path == '\0') return {Outcome::Status::skip, "RDDC_CHARTRAJ_PATH not set"};
  ExperimentConfig c;
  c.data = path;
  c.fc1_units = 16;
  c.train.epochs = 150;
  c.train.restarts = 20;
  c.train.jobs = 1;
  apply_seed(c, 1);
  c.out_dir = scratch("chartraj");
  TrainReport r = cmd_train(c);
  double a = r.test.acc.value_or(0.0);
  return pass_if(a >= 0.95, fmt::format("test ACC {:.3f}, NMI {:.3f}", a, r.test.nmi.value_or(0.0)));
}

}  // namespace

int main(int argc, char** argv) {
  set_log_level("warn");
  const std::vector<std::pair<const char*, Outcome (*)()>> criteria = {
      {"gradient correctness", gradients},
      {"loss bounds and invariances", loss_bounds},
      {"oracle equivalence", oracles},
      {"analytic anchors", anchors},
      {"masking", masking},
      {"two-class synthetic clustering", two_class},
      {"three-class synthetic clustering", three_class},
      {"baseline sanity", baseline_sanity},
      {"determinism", determinism},
      {"character trajectories (optional)", character_trajectories},
  };
  std::set<std::size_t> only;
  for (int i = 1; i < argc; ++i) only.insert(static_cast<std::size_t>(std::stoul(argv[i])));

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!only.empty() && !only.count(i + 1)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {Outcome::Status::fail, std::string("exception: ") + e.what()};
    }
    const char* tag = o.status == Outcome::Status::pass ? "PASS" : o.status == Outcome::Status::fail ? "FAIL" : "SKIP";
    if (o.status == Outcome::Status::fail) ++failures;
    std::cout << fmt::format("{} {:2} {}: {}", tag, i + 1, criteria[i].first, o.detail) << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
