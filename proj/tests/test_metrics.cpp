#include <random>

#include <doctest.h>

#include "sparseseg/metrics.hpp"

using namespace sparseseg;

namespace {

LabelMask mask_of(std::vector<std::uint16_t> labels, int classes) {
  const auto n = static_cast<int>(labels.size());
  return LabelMask(Index3(n, 1, 1), Spacing3(1, 1, 1), std::move(labels), classes);
}

}  // namespace

TEST_CASE("dice of identical masks is one for every class") {
  const auto m = mask_of({0, 1, 1, 2, 0, 3}, 5);
  const auto dice = dice_per_class(m, m);
  REQUIRE(dice.size() == 4);
  for (double d : dice) CHECK(d == 1.0);  // class 4 absent from both
}

TEST_CASE("dice of disjoint regions and half overlap") {
  CHECK(dice_per_class(mask_of({1, 1, 0, 0}, 2), mask_of({0, 0, 1, 1}, 2))[0] == 0.0);
  // |P| = |T| = 4, overlap 2 -> 2*2 / 8.
  const auto pred = mask_of({1, 1, 1, 1, 0, 0, 0, 0}, 2);
  const auto truth = mask_of({0, 0, 1, 1, 1, 1, 0, 0}, 2);
  CHECK(dice_per_class(pred, truth)[0] == doctest::Approx(0.5));
  CHECK(dice_per_class(mask_of({1, 0}, 2), mask_of({0, 0}, 2))[0] == 0.0);
  CHECK_THROWS_AS(dice_per_class(mask_of({0}, 2), mask_of({0, 0}, 2)), Error);
}

TEST_CASE("dice is symmetric and bounded") {
  std::mt19937 rng(3);
  for (int t = 0; t < 20; ++t) {
    std::vector<std::uint16_t> a(200), b(200);
    for (auto& x : a) x = rng() % 4;
    for (auto& x : b) x = rng() % 4;
    const auto ab = dice_per_class(mask_of(a, 4), mask_of(b, 4));
    const auto ba = dice_per_class(mask_of(b, 4), mask_of(a, 4));
    CHECK(ab == ba);
    for (double d : ab) {
      CHECK(d >= 0.0);
      CHECK(d <= 1.0);
    }
  }
}

TEST_CASE("accuracy and macro-F1") {
  ConfusionCounts perfect(3);
  for (int c = 0; c < 3; ++c) perfect.add(c, c);
  auto s = accuracy_and_macro_f1(perfect);
  CHECK(s.accuracy == 1.0);
  CHECK(s.macro_f1 == 1.0);

  // Class 2 neither present nor predicted: contributes 0.
  ConfusionCounts sparse(3);
  sparse.add(0, 0);
  sparse.add(1, 1);
  s = accuracy_and_macro_f1(sparse);
  CHECK(s.per_class_f1[2] == 0.0);
  CHECK(s.macro_f1 == doctest::Approx(2.0 / 3.0));

  // Rows: truth, columns: prediction.
  //   [5 1 0]
  //   [2 3 1]
  //   [0 1 4]
  ConfusionCounts hand(3);
  const int m[3][3] = {{5, 1, 0}, {2, 3, 1}, {0, 1, 4}};
  for (int t = 0; t < 3; ++t)
    for (int p = 0; p < 3; ++p)
      for (int n = 0; n < m[t][p]; ++n) hand.add(t, p);
  s = accuracy_and_macro_f1(hand);
  CHECK(s.accuracy == doctest::Approx(12.0 / 17.0).epsilon(1e-12));
  // precision: 5/7, 3/5, 4/5; recall: 5/6, 3/6, 4/5
  const double f0 = 2 * (5.0 / 7) * (5.0 / 6) / (5.0 / 7 + 5.0 / 6);
  const double f1 = 2 * (3.0 / 5) * (3.0 / 6) / (3.0 / 5 + 3.0 / 6);
  const double f2 = 0.8;
  CHECK(std::abs(s.macro_f1 - (f0 + f1 + f2) / 3) < 1e-9);
  CHECK(std::abs(s.macro_f1 - 0.704895104895105) < 1e-9);

  CHECK_THROWS_WITH_AS(accuracy_and_macro_f1(ConfusionCounts(2)), doctest::Contains("EmptyCounts"), Error);
  CHECK_THROWS_AS(hand.add(3, 0), Error);
}

TEST_CASE("confusion from masks counts every voxel") {
  const auto pred = mask_of({0, 1, 1, 2}, 3);
  const auto truth = mask_of({0, 1, 2, 2}, 3);
  const auto counts = confusion_from_masks(pred, truth);
  CHECK(counts.total() == 4);
  CHECK(counts.matrix(2, 1) == 1);
  CHECK(accuracy_and_macro_f1(counts).accuracy == 0.75);
}
