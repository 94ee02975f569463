#include <gtest/gtest.h>

#include "support.hpp"

using namespace priorsplat;
using namespace priorsplat::testing;

TEST(Gradients, FullLossMatchesCentralDifferences) {
  int bad = 0;
  for (uint64_t seed = 0; seed < 4; ++seed) {
    const FdScene sc = make_fd_scene(seed);
    const auto grads = fd_analytic(sc);
    for (size_t i = 0; i < sc.splats.size(); ++i) {
      for (int k = 0; k < kSplatParams; ++k) {
        const double num = fd_numeric(sc, i, k);
        if (!gradient_close(grads[i][k], num)) {
          ++bad;
          ADD_FAILURE() << "seed " << seed << " splat " << i << " param " << k << ": analytic " << grads[i][k]
                        << " numeric " << num;
        }
      }
    }
  }
  EXPECT_EQ(bad, 0);
}

TEST(Gradients, EachLossTermSeparately) {
  const LossWeights terms[] = {{0, 0, 0, 0}, {100, 0, 0, 0}, {0, 0.05, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 0.05}};
  for (const auto& w : terms) {
    FdScene sc = make_fd_scene(11);
    sc.weights = w;
    const auto grads = fd_analytic(sc);
    for (size_t i = 0; i < sc.splats.size(); ++i) {
      for (int k = 0; k < kSplatParams; ++k) {
        const double num = fd_numeric(sc, i, k);
        EXPECT_TRUE(gradient_close(grads[i][k], num))
            << "weights " << w.lambda_d << "," << w.lambda_n << "," << w.lambda_db << "," << w.lambda_nb
            << " splat " << i << " param " << k << ": analytic " << grads[i][k] << " numeric " << num;
      }
    }
  }
}
