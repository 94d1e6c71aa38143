#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "oracle.hpp"
#include "wscd/localize.hpp"
#include "wscd/retrieve.hpp"
#include "wscd/separate.hpp"

using namespace wscd;

namespace {

// Random changed-sample context: features, a non-empty instance segmentation
// and a disjoint background mask.
struct Context {
  FeatureMap features;
  ConnectivityResult conn;
  BinaryMask background;
};

Context random_context(Rng& rng, Dim2 dims, int channels) {
  while (true) {
    std::vector<double> scores(dims.pixel_count());
    for (auto& v : scores) v = rng.uniform();
    const ScoreMap cam(dims, scores);
    const ThresholdConfig cfg{};
    BinaryMask m_c = changed_localization(cam, cfg);
    BinaryMask m_uc = unchanged_localization(cam, cfg);
    if (m_c.ones_count() == 0 || m_uc.ones_count() < 2) continue;
    auto conn = connectivity_search(m_c);
    return Context{oracle::random_features(rng, dims, channels),
                   std::move(conn), std::move(m_uc)};
  }
}

void check_gradient(const FeatureMap& f,
                    const std::function<double(const FeatureMap&)>& loss,
                    const FeatureMap& grad, double tol) {
  std::vector<double> values(f.values().begin(), f.values().end());
  const auto eval = [&]() { return loss(FeatureMap(f.dims(), f.channels(), values)); };
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double numeric = oracle::central_diff(eval, values, i);
    CHECK(oracle::rel_err(grad.values()[i], numeric) < tol);
  }
}

double grad_group_sum(const FeatureMap& grad, int channel) {
  double sum = 0.0;
  for (std::size_t i = 0; i < grad.dims().pixel_count(); ++i) sum += grad.at(i, channel);
  return sum;
}

}  // namespace

TEST_CASE("changed branch on a two-pixel instance") {
  // one instance, features {0, 2}: centroid 1, loss ((0-1)^2 + (2-1)^2)/2 = 1
  const FeatureMap f(Dim2{2, 1}, 1, {0.0, 2.0});
  const InstanceIdMask ids(Dim2{2, 1}, {1, 1});
  const InstanceTable table({{0, 1}});
  const auto [loss, grad] = changed_branch(f, table, ids);
  CHECK(loss == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(grad.at(0, 0) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(grad.at(1, 0) == doctest::Approx(1.0).epsilon(1e-12));

  check_gradient(f, [&](const FeatureMap& x) { return changed_branch(x, table, ids).loss; },
                 grad, 1e-6);
}

TEST_CASE("identical features cluster for free") {
  const FeatureMap f(Dim2{1, 3}, 2, {4.0, -1.0, 4.0, -1.0, 4.0, -1.0});
  const InstanceIdMask ids(Dim2{1, 3}, {1, 1, 1});
  const auto [loss, grad] = changed_branch(f, InstanceTable(std::vector<std::vector<std::size_t>>{{0, 1, 2}}), ids);
  CHECK(loss == 0.0);
  for (double g : grad.values()) CHECK(g == 0.0);
}

TEST_CASE("no instances means zero changed loss") {
  const FeatureMap f(Dim2{1, 2}, 1, {1.0, 2.0});
  const auto [loss, grad] = changed_branch(f, InstanceTable{}, InstanceIdMask::zeros(Dim2{1, 2}));
  CHECK(loss == 0.0);
  for (double g : grad.values()) CHECK(g == 0.0);
}

TEST_CASE("changed branch validates the table against the id mask") {
  const FeatureMap f(Dim2{1, 2}, 1, {1.0, 2.0});
  const InstanceIdMask ids(Dim2{1, 2}, {1, 0});
  CHECK_THROWS_AS(changed_branch(f, InstanceTable(std::vector<std::vector<std::size_t>>{{0, 1}}), ids), std::invalid_argument);
}

TEST_CASE("background branch on a two-pixel mask") {
  const FeatureMap f(Dim2{2, 2}, 1, {1.0, 5.0, 3.0, -2.0});
  const BinaryMask m(Dim2{2, 2}, {1, 0, 1, 0});  // features {1, 3}
  const auto [loss, grad] = background_branch(f, m);
  CHECK(loss == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(grad.at(std::size_t{0}, 0) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(grad.at(std::size_t{2}, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(grad.at(std::size_t{1}, 0) == 0.0);
  CHECK(grad.at(std::size_t{3}, 0) == 0.0);

  check_gradient(f, [&](const FeatureMap& x) { return background_branch(x, m).loss; },
                 grad, 1e-6);
}

TEST_CASE("background branch degenerates gracefully") {
  const FeatureMap f(Dim2{1, 2}, 1, {1.0, 2.0});
  const auto empty = background_branch(f, BinaryMask::zeros(Dim2{1, 2}));
  CHECK(empty.loss == 0.0);
  for (double g : empty.grad.values()) CHECK(g == 0.0);

  const auto single = background_branch(f, BinaryMask(Dim2{1, 2}, {1, 0}));
  CHECK(single.loss == 0.0);  // one point equals its centroid
}

TEST_CASE("whole-image branch") {
  const auto constant = unchanged_image_branch(FeatureMap(Dim2{2, 2}, 1, {3, 3, 3, 3}));
  CHECK(constant.loss == 0.0);

  const auto two = unchanged_image_branch(FeatureMap(Dim2{2, 1}, 1, {0.0, 2.0}));
  CHECK(two.loss == doctest::Approx(1.0).epsilon(1e-12));

  // brute-force oracle: mean squared deviation from the mean vector
  const FeatureMap f(Dim2{2, 2}, 2, {1, 2, 3, 4, 5, 6, 7, 8});
  double mean0 = (1 + 3 + 5 + 7) / 4.0;
  double mean1 = (2 + 4 + 6 + 8) / 4.0;
  double want = 0.0;
  for (int i = 0; i < 4; ++i) {
    const double d0 = f.at(static_cast<std::size_t>(i), 0) - mean0;
    const double d1 = f.at(static_cast<std::size_t>(i), 1) - mean1;
    want += (d0 * d0 + d1 * d1) / 4.0;
  }
  const auto res = unchanged_image_branch(f);
  CHECK(res.loss == doctest::Approx(want).epsilon(1e-12));
  check_gradient(f, [](const FeatureMap& x) { return unchanged_image_branch(x).loss; },
                 res.grad, 1e-6);
}

TEST_CASE("analytic gradients match finite differences on random contexts") {
  Rng rng(404);
  for (int trial = 0; trial < 6; ++trial) {
    const Dim2 dims{rng.uniform_int(3, 8), rng.uniform_int(3, 8)};
    const int channels = rng.uniform_int(1, 4);
    const Context ctx = random_context(rng, dims, channels);

    const auto cc = changed_branch(ctx.features, ctx.conn.table, ctx.conn.id_mask);
    check_gradient(ctx.features,
                   [&](const FeatureMap& x) {
                     return changed_branch(x, ctx.conn.table, ctx.conn.id_mask).loss;
                   },
                   cc.grad, 1e-6);

    const auto cu = background_branch(ctx.features, ctx.background);
    check_gradient(ctx.features,
                   [&](const FeatureMap& x) { return background_branch(x, ctx.background).loss; },
                   cu.grad, 1e-6);

    const auto uu = unchanged_image_branch(ctx.features);
    check_gradient(ctx.features,
                   [](const FeatureMap& x) { return unchanged_image_branch(x).loss; },
                   uu.grad, 1e-6);
  }
}

TEST_CASE("per-group gradients sum to zero") {
  Rng rng(405);
  for (int trial = 0; trial < 10; ++trial) {
    const Dim2 dims{rng.uniform_int(3, 8), rng.uniform_int(3, 8)};
    const int channels = rng.uniform_int(1, 4);
    const Context ctx = random_context(rng, dims, channels);
    for (const auto& res :
         {changed_branch(ctx.features, ctx.conn.table, ctx.conn.id_mask),
          background_branch(ctx.features, ctx.background),
          unchanged_image_branch(ctx.features)}) {
      for (int c = 0; c < channels; ++c) {
        CHECK(std::abs(grad_group_sum(res.grad, c)) < 1e-9);
      }
    }
  }
}

TEST_CASE("centroid gradient path is observationally detached") {
  // Differentiating through the centroid adds -(2/N^2) * sum_j (f_j - p),
  // which cancels analytically; evaluated numerically it must agree with the
  // implementation to tight tolerance.
  Rng rng(406);
  const Dim2 dims{4, 4};
  const Context ctx = random_context(rng, dims, 3);
  const auto res = changed_branch(ctx.features, ctx.conn.table, ctx.conn.id_mask);

  const int d = ctx.features.channels();
  std::vector<double> through(res.grad.values().size(), 0.0);
  for (int k = 1; k <= ctx.conn.table.count(); ++k) {
    const auto pixels = ctx.conn.table.pixels(k);
    const double n = static_cast<double>(pixels.size());
    std::vector<double> centroid(static_cast<std::size_t>(d), 0.0);
    for (std::size_t i : pixels) {
      for (int c = 0; c < d; ++c) centroid[static_cast<std::size_t>(c)] += ctx.features.at(i, c) / n;
    }
    std::vector<double> residual_sum(static_cast<std::size_t>(d), 0.0);
    for (std::size_t i : pixels) {
      for (int c = 0; c < d; ++c) {
        residual_sum[static_cast<std::size_t>(c)] +=
            ctx.features.at(i, c) - centroid[static_cast<std::size_t>(c)];
      }
    }
    for (std::size_t i : pixels) {
      for (int c = 0; c < d; ++c) {
        through[i * static_cast<std::size_t>(d) + c] +=
            (2.0 / n) * (ctx.features.at(i, c) - centroid[static_cast<std::size_t>(c)]) -
            (2.0 / (n * n)) * residual_sum[static_cast<std::size_t>(c)];
      }
    }
  }
  for (std::size_t i = 0; i < through.size(); ++i) {
    CHECK(std::abs(through[i] - res.grad.values()[i]) < 1e-12);
  }
}

TEST_CASE("branch losses are nonnegative and vanish only on identical features") {
  Rng rng(407);
  const Dim2 dims{4, 4};
  const Context ctx = random_context(rng, dims, 2);
  CHECK(changed_branch(ctx.features, ctx.conn.table, ctx.conn.id_mask).loss >= 0.0);
  CHECK(background_branch(ctx.features, ctx.background).loss > 0.0);
  CHECK(unchanged_image_branch(ctx.features).loss > 0.0);

  const FeatureMap constant(dims, 2, std::vector<double>(dims.pixel_count() * 2, 0.7));
  CHECK(background_branch(constant, ctx.background).loss == 0.0);
  CHECK(unchanged_image_branch(constant).loss == 0.0);
}

TEST_CASE("branch losses are translation invariant") {
  Rng rng(408);
  const Dim2 dims{5, 5};
  const int channels = 3;
  const Context ctx = random_context(rng, dims, channels);
  std::vector<double> offset{10.5, -3.25, 0.125};
  std::vector<double> shifted(ctx.features.values().begin(), ctx.features.values().end());
  for (std::size_t i = 0; i < shifted.size(); ++i) {
    shifted[i] += offset[i % static_cast<std::size_t>(channels)];
  }
  const FeatureMap moved(dims, channels, std::move(shifted));

  const double a1 = changed_branch(ctx.features, ctx.conn.table, ctx.conn.id_mask).loss;
  const double b1 = changed_branch(moved, ctx.conn.table, ctx.conn.id_mask).loss;
  CHECK(std::abs(a1 - b1) < 1e-9);
  const double a2 = background_branch(ctx.features, ctx.background).loss;
  const double b2 = background_branch(moved, ctx.background).loss;
  CHECK(std::abs(a2 - b2) < 1e-9);
  const double a3 = unchanged_image_branch(ctx.features).loss;
  const double b3 = unchanged_image_branch(moved).loss;
  CHECK(std::abs(a3 - b3) < 1e-9);
}

TEST_CASE("scope gating") {
  Rng rng(409);
  const Dim2 dims{4, 4};
  const Context ctx = random_context(rng, dims, 2);
  SampleLossInputs changed;
  changed.features = &ctx.features;
  changed.changed_label = true;
  changed.instances = &ctx.conn.table;
  changed.id_mask = &ctx.conn.id_mask;
  changed.background = &ctx.background;

  SeparationConfig cc{0.1, SamplingScope::cc, 0};
  const auto only_cc = separation_loss(changed, cc);
  CHECK(only_cc.l_sep == only_cc.l_pc);
  CHECK(only_cc.l_puc == 0.0);
  CHECK(only_cc.l_pu == 0.0);

  SeparationConfig cc_cu{0.1, SamplingScope::cc_cu, 0};
  SampleLossInputs unchanged;
  unchanged.features = &ctx.features;
  unchanged.changed_label = false;
  const auto gated_off = separation_loss(unchanged, cc_cu);
  CHECK(gated_off.l_sep == 0.0);

  SeparationConfig all{0.1, SamplingScope::cc_cu_uu, 0};
  const auto on_unchanged = separation_loss(unchanged, all);
  CHECK(on_unchanged.l_sep == on_unchanged.l_pu);
  CHECK(on_unchanged.l_pu > 0.0);
}

TEST_CASE("combined example: one instance plus two background pixels") {
  // 2x2, D=1: instance pixels {0, 2} with features {0, 2}; background pixels
  // {1, 3} with features {1, 3}; each branch contributes 1.0
  const FeatureMap f(Dim2{2, 2}, 1, {0.0, 1.0, 2.0, 3.0});
  const InstanceIdMask ids(Dim2{2, 2}, {1, 0, 1, 0});
  const InstanceTable table({{0, 2}});
  const BinaryMask background(Dim2{2, 2}, {0, 1, 0, 1});

  SampleLossInputs inputs;
  inputs.features = &f;
  inputs.changed_label = true;
  inputs.instances = &table;
  inputs.id_mask = &ids;
  inputs.background = &background;
  const auto bd = separation_loss(inputs, SeparationConfig{0.1, SamplingScope::cc_cu_uu, 0});
  CHECK(bd.l_pc == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(bd.l_puc == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(bd.l_pu == 0.0);  // whole-image branch applies to unchanged samples only
  CHECK(bd.l_sep == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(bd.l_sep == bd.l_pc + bd.l_puc + bd.l_pu);  // exact additivity
}

TEST_CASE("scope widening never lowers the loss") {
  Rng rng(410);
  for (int trial = 0; trial < 10; ++trial) {
    const Dim2 dims{rng.uniform_int(3, 8), rng.uniform_int(3, 8)};
    const Context ctx = random_context(rng, dims, 2);
    SampleLossInputs inputs;
    inputs.features = &ctx.features;
    inputs.changed_label = trial % 2 == 0;
    inputs.instances = &ctx.conn.table;
    inputs.id_mask = &ctx.conn.id_mask;
    inputs.background = &ctx.background;

    const double cc = separation_loss(inputs, {0.1, SamplingScope::cc, 0}).l_sep;
    const double cc_cu = separation_loss(inputs, {0.1, SamplingScope::cc_cu, 0}).l_sep;
    const double all = separation_loss(inputs, {0.1, SamplingScope::cc_cu_uu, 0}).l_sep;
    CHECK(cc <= cc_cu);
    CHECK(cc_cu <= all);
  }
}

TEST_CASE("separation loss validates its inputs") {
  const FeatureMap f(Dim2{2, 2}, 1, {0, 1, 2, 3});
  SampleLossInputs missing;
  missing.features = &f;
  missing.changed_label = true;
  CHECK_THROWS_AS(separation_loss(missing, SeparationConfig{}), std::invalid_argument);

  SampleLossInputs no_features;
  CHECK_THROWS_AS(separation_loss(no_features, SeparationConfig{}), std::invalid_argument);

  const InstanceIdMask ids(Dim2{3, 3}, {1, 0, 0, 0, 0, 0, 0, 0, 0});
  SampleLossInputs mismatched;
  mismatched.features = &f;
  mismatched.changed_label = true;
  const InstanceTable table(std::vector<std::vector<std::size_t>>{{0}});
  mismatched.instances = &table;
  mismatched.id_mask = &ids;
  const BinaryMask background = BinaryMask::zeros(Dim2{3, 3});
  mismatched.background = &background;
  CHECK_THROWS_AS(separation_loss(mismatched, SeparationConfig{}), std::invalid_argument);
}

TEST_CASE("instance stats match direct recomputation") {
  Rng rng(411);
  const Dim2 dims{6, 6};
  const Context ctx = random_context(rng, dims, 3);
  const auto stats = compute_instance_stats(ctx.features, &ctx.conn.table, &ctx.background);
  REQUIRE(stats.changed_centroid.size() == static_cast<std::size_t>(ctx.conn.table.count()));
  for (int k = 1; k <= ctx.conn.table.count(); ++k) {
    const auto pixels = ctx.conn.table.pixels(k);
    for (int c = 0; c < 3; ++c) {
      double mean = 0.0;
      for (std::size_t i : pixels) mean += ctx.features.at(i, c);
      mean /= static_cast<double>(pixels.size());
      const double got = stats.changed_centroid[static_cast<std::size_t>(k - 1)]
                                               [static_cast<std::size_t>(c)];
      CHECK(oracle::rel_err(got, mean, 1e-12) < 1e-12);
    }
  }
  CHECK(stats.background_count == ctx.background.ones_count());
  CHECK(stats.image_centroid.size() == 3);
}

TEST_CASE("total loss gates on warmup and weight") {
  LossBreakdown bd{1.0, 0.5, 0.5, 2.0, FeatureMap::zeros(Dim2{1, 1}, 1)};
  const SeparationConfig cfg{0.1, SamplingScope::cc_cu_uu, 200};
  CHECK(total_loss(0.5, bd, cfg, 200) == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(total_loss(0.5, bd, cfg, 1999) == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(total_loss(0.5, bd, cfg, 199) == 0.5);
  CHECK(total_loss(0.5, bd, SeparationConfig{0.0, SamplingScope::cc_cu_uu, 0}, 5000) == 0.5);

  SeparationConfig bad{-0.1, SamplingScope::cc, 0};
  CHECK_THROWS_AS(total_loss(0.5, bd, bad, 10), std::invalid_argument);
}

TEST_CASE("scope strings round trip") {
  CHECK(to_string(SamplingScope::cc) == "CC");
  CHECK(parse_scope("CC+CU") == SamplingScope::cc_cu);
  CHECK(parse_scope("CC+CU+UU") == SamplingScope::cc_cu_uu);
  CHECK_FALSE(parse_scope("cc").has_value());
}
