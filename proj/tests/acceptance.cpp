// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <regex>
#include <sstream>
#include <string>
#include <thread>

#include "segment_oracles.hpp"
#include "sparseseg/dataset.hpp"
#include "sparseseg/metrics.hpp"
#include "sparseseg/model.hpp"
#include "sparseseg/sampler.hpp"
#include "sparseseg/segmenter.hpp"
#include "sparseseg/volume.hpp"

using namespace sparseseg;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(const std::string& name, const std::function<Outcome()>& body) {
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::cout << (o.pass ? "PASS  " : "FAIL  ") << name << "  [" << o.detail << "]" << std::endl;
}

/// Classifier wrapper that counts calls.
class CountingClassifier final : public PointClassifier {
public:
  explicit CountingClassifier(const PointClassifier& inner) : inner_(inner) {}
  std::uint16_t classify(const Volume& v, const Index3& p) const override {
    calls_.fetch_add(1, std::memory_order_relaxed);
    return inner_.classify(v, p);
  }
  int num_classes() const override { return inner_.num_classes(); }
  std::int64_t calls() const { return calls_.load(); }

private:
  const PointClassifier& inner_;
  mutable std::atomic<std::int64_t> calls_{0};
};

const std::array<std::string, 3> kPhantoms{"sphere", "nested", "boxes"};

Phantom acceptance_phantom(const std::string& name) {
  return synth_phantom(standard_phantom(name, 64, 2.0f), kPhantomBackground);
}

int max_threads() { return std::max(4, static_cast<int>(std::thread::hardware_concurrency())); }

// --- 1. descriptor geometry ---------------------------------------------------

Outcome geometry() {
  const auto start = Clock::now();
  const OffsetTable t = build_offset_table();

  std::vector<Eigen::Vector3f> expected;
  for (int plane = 0; plane < 3; ++plane)
    for (int b = -13; b <= 13; ++b)
      for (int a = -13; a <= 13; ++a) {
        const Eigen::Vector3f u(4.0f * a, 4.0f * b, 0.0f);
        expected.push_back(plane == 0 ? u : plane == 1 ? Eigen::Vector3f(u.x(), 0, u.y())
                                                       : Eigen::Vector3f(0, u.x(), u.y()));
      }
  const std::array<float, 6> cubes{2, 3, 5, 12, 28, 64};
  for (float step : cubes)
    for (int z = -4; z <= 4; ++z)
      for (int y = -4; y <= 4; ++y)
        for (int x = -4; x <= 4; ++x) expected.emplace_back(step * x, step * y, step * z);

  bool ok = t.offsets_mm.size() == 6561 && expected == t.offsets_mm;
  int first = 0;
  for (int b = 0; b < 9; ++b) {
    const auto& l = t.blocks[b];
    ok = ok && l.first == first && l.count == 729 && l.extent == (b < 3 ? 27 : 9) &&
         l.resolution_mm == (b < 3 ? 4.0f : cubes[b - 3]);
    first += l.count;
  }
  const double s = seconds_since(start);
  std::ostringstream d;
  d << t.offsets_mm.size() << " offsets, enumeration " << (ok ? "matches" : "differs") << ", " << s << " s";
  return {ok && s < 1.0, d.str()};
}

// --- 2. normalisation -------------------------------------------------------

Outcome normalization() {
  // The 256 mm footprint must lie inside the grid so no sample falls outside.
  std::ostringstream d;
  bool ok = true;
  for (float spacing : {8.0f, 4.0f}) {
    const int half = static_cast<int>(256.0f / spacing);
    const Index3 dims = Index3::Constant(2 * half + 1);
    const auto table = bind_to_spacing(canonical_offset_table(), Spacing3::Constant(spacing));
    for (auto [raw, want] : {std::pair{128.0f, 1.0f}, {-1024.0f, -4.0f}, {0.0f, 0.0f}}) {
      const Volume v(dims, Spacing3::Constant(spacing), raw);
      const auto desc = extract_descriptor(v, Index3::Constant(half), table);
      const bool exact = (desc.values.array() == want).all();
      ok = ok && exact;
      d << raw << "@" << spacing << "mm->" << (exact ? "exact " : "WRONG ");
    }
  }
  return {ok, d.str()};
}

// --- 3. oracle equivalence ----------------------------------------------------

Outcome oracle_equivalence() {
  const auto start = Clock::now();
  bool ok = true;
  std::ostringstream d;
  d << std::setprecision(4);
  for (const auto& name : kPhantoms) {
    const auto p = acceptance_phantom(name);
    const GroundTruthClassifier oracle(p.mask);
    const auto result = segment(p.volume, oracle);
    const auto brute = brute_force_segment(p.volume, oracle);

    // One finest-grid cell: the stride of the last level.
    const Index3 cell = result.stats.levels.back().stride;
    const auto outside = testing::disagreements_outside_band(result.mask, brute, p.mask, cell);
    int needed = cell.maxCoeff();
    while (!testing::disagreements_outside_band(result.mask, brute, p.mask, Index3::Constant(needed)).empty())
      ++needed;

    const auto dice = dice_per_class(result.mask, p.mask);
    const double worst = *std::min_element(dice.begin(), dice.end());
    const bool pass = outside.empty() && worst >= 0.95;
    ok = ok && pass;
    d << name << ": " << outside.size() << " disagreements beyond 1 cell"
      << (outside.empty() ? "" : " (band FAIL)") << ", widest band needed " << needed
      << " vox, min dice " << worst << (worst >= 0.95 ? "" : " (dice FAIL)") << "; ";
  }
  const double s = seconds_since(start);
  d << "total " << s << " s";
  return {ok && s < 60.0, d.str()};
}

// --- 4. parallel determinism --------------------------------------------------

Outcome parallel_determinism() {
  const int many = max_threads();
  bool ok = true;
  std::ostringstream d;
  d << "1 vs " << many << " threads: ";
  for (const auto& name : kPhantoms) {
    const auto p = acceptance_phantom(name);
    const GroundTruthClassifier oracle(p.mask);
    SegmentOptions one, all;
    one.threads = 1;
    all.threads = many;
    const bool same = write_mask(segment(p.volume, oracle, one).mask) ==
                      write_mask(segment(p.volume, oracle, all).mask);
    ok = ok && same;
    d << name << (same ? " identical; " : " DIFFERENT; ");
  }
  // Same check through the network, on a smaller grid to bound runtime.
  const auto small = synth_phantom(standard_phantom("nested", 32, 4.0f), kPhantomBackground);
  const auto weights = make_random_weights(kDescriptorSize, 32, 2, default_label_names(3), 17);
  const ModelPointClassifier model(weights, small.volume.spacing());
  SegmentOptions one, all;
  one.threads = 1;
  all.threads = many;
  const bool same = write_mask(segment(small.volume, model, one).mask) ==
                    write_mask(segment(small.volume, model, all).mask);
  ok = ok && same;
  d << "model/nested32 " << (same ? "identical" : "DIFFERENT");
  return {ok, d.str()};
}

// --- 5. call economy ------------------------------------------------------------

Outcome call_economy() {
  const auto p = acceptance_phantom("sphere");
  const GroundTruthClassifier oracle(p.mask);
  const CountingClassifier counted(oracle);
  const auto result = segment(p.volume, counted);
  const CountingClassifier brute_counted(oracle);
  brute_force_segment(p.volume, brute_counted);

  const double voxels = static_cast<double>(p.volume.size());
  const double sparse = static_cast<double>(counted.calls()) / voxels;
  const double brute = static_cast<double>(brute_counted.calls()) / voxels;
  std::ostringstream d;
  d << std::setprecision(4) << "segment " << counted.calls() << " calls (" << 100 * sparse
    << "% of " << p.volume.size() << " voxels, stats report " << result.stats.classifier_calls()
    << "), brute force " << 100 * brute << "%";
  return {sparse <= 0.20 && brute == 1.0 && result.stats.classifier_calls() == counted.calls(), d.str()};
}

// --- 6. format round-trips ------------------------------------------------------

Outcome round_trips() {
  constexpr int kCases = 100;
  std::mt19937 rng(20240611);
  const auto dims = [&] { return Index3(1 + rng() % 9, 1 + rng() % 9, 1 + rng() % 9); };
  const auto spacing = [&] {
    std::uniform_real_distribution<float> s(0.1f, 5.0f);
    return Spacing3(s(rng), s(rng), s(rng));
  };
  std::normal_distribution<float> value(0.0f, 500.0f);
  std::array<int, 4> good{};

  for (int t = 0; t < kCases; ++t) {
    const Index3 d = dims();
    std::vector<float> data(d.prod());
    for (auto& x : data) x = value(rng);
    const auto bytes = write_raw(Volume(d, spacing(), data));
    good[0] += write_raw(parse_raw(bytes)) == bytes;
  }
  for (int t = 0; t < kCases; ++t) {
    const Index3 d = dims();
    const int classes = 2 + static_cast<int>(rng() % 20);
    std::vector<std::uint16_t> labels(d.prod());
    for (auto& x : labels) x = static_cast<std::uint16_t>(rng() % classes);
    const auto bytes = write_mask(LabelMask(d, spacing(), labels, classes));
    good[1] += write_mask(parse_mask(bytes)) == bytes;
  }
  for (int t = 0; t < kCases; ++t) {
    const int classes = 2 + static_cast<int>(rng() % 6);
    std::vector<std::string> names;
    for (int c = 0; c < classes; ++c) names.push_back("class " + std::to_string(rng() % 1000));
    const auto w = make_random_weights(1 + rng() % 50, 1 + rng() % 12, 1 + rng() % 3, names, rng());
    const auto bytes = save_weights(w);
    good[2] += save_weights(load_weights(bytes)) == bytes;
  }
  for (int t = 0; t < kCases; ++t) {
    DescriptorDataset ds;
    const int dim = 1 + static_cast<int>(rng() % 64);
    const int count = static_cast<int>(rng() % 20);
    ds.rows = DescriptorRows(count, dim);
    for (Eigen::Index i = 0; i < ds.rows.size(); ++i) ds.rows.data()[i] = value(rng);
    for (int r = 0; r < count; ++r) ds.labels.push_back(static_cast<std::uint16_t>(rng()));
    const auto bytes = write_dataset(ds);
    good[3] += write_dataset(read_dataset(bytes)) == bytes;
  }
  std::ostringstream d;
  d << "byte-exact: ORGV " << good[0] << "/" << kCases << ", ORGM " << good[1] << "/" << kCases
    << ", ORGC " << good[2] << "/" << kCases << ", ORGD " << good[3] << "/" << kCases;
  return {std::all_of(good.begin(), good.end(), [](int g) { return g == kCases; }), d.str()};
}

// --- 7. latency -------------------------------------------------------------------

Outcome latency() {
  const auto weights = make_random_weights(kDescriptorSize, 128, 4, default_label_names(14), 7);
  const Volume small(Index3::Constant(64), Spacing3(2, 2, 2), 0.0f);
  const Volume large(Index3::Constant(256), Spacing3(2, 2, 2), 0.0f);
  const ModelPointClassifier on_small(weights, small.spacing());
  const ModelPointClassifier on_large(weights, large.spacing());

  // Interleave the two sizes in rounds so slow drift hits both equally.
  constexpr int kQueries = 1000, kRound = 50;
  std::mt19937_64 rng(5);
  std::array<double, 2> total_ms{};
  int sink = 0;
  for (int done = 0; done < kQueries; done += kRound)
    for (int which = 0; which < 2; ++which) {
      const Volume& v = which ? large : small;
      const ModelPointClassifier& c = which ? on_large : on_small;
      for (int q = 0; q < kRound; ++q) {
        const Index3 p(static_cast<int>(uniform_index(rng, v.dims().x())),
                       static_cast<int>(uniform_index(rng, v.dims().y())),
                       static_cast<int>(uniform_index(rng, v.dims().z())));
        const auto start = Clock::now();
        sink += c.predict(v, p).argmax_label;
        total_ms[which] += std::chrono::duration<double, std::milli>(Clock::now() - start).count();
      }
    }
  const double a = total_ms[0] / kQueries, b = total_ms[1] / kQueries;
  const double diff = std::abs(a - b) / std::min(a, b);
  std::ostringstream d;
  d << std::setprecision(4) << "mean 64^3 " << a << " ms, 256^3 " << b << " ms, difference "
    << 100 * diff << "% (BTCV-hardware target 0.92 ms, not gated)" << (sink < 0 ? "!" : "");
  return {std::max(a, b) <= 5.0 && diff < 0.20, d.str()};
}

// --- 8. experiment protocol through the CLI ----------------------------------------

struct Run {
  int status = -1;
  std::string out;
};

Run run_cli(const std::string& args) {
  const std::string cmd = std::string(SPARSESEG_CLI) + " " + args + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

std::string value_of(const std::string& out, const std::string& key) {
  std::smatch m;
  return std::regex_search(out, m, std::regex("(^|\n)" + key + "=([^\n]*)")) ? m[2].str() : "";
}

Outcome protocol() {
  const fs::path dir = fs::temp_directory_path() / ("sparseseg_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const auto at = [&](const std::string& f) { return (dir / f).string(); };

  std::ostringstream d;
  bool ok = run_cli("phantom --kind nested --size 32 --spacing 4 --out-volume " + at("v.orgv") +
                    " --out-mask " + at("m.orgm")).status == 0 &&
            run_cli("init-model --classes 3 --seed 11 --out " + at("w.orgc")).status == 0;

  const auto bench = run_cli("bench --volume " + at("v.orgv") + " --weights " + at("w.orgc") +
                             " --mask " + at("m.orgm") + " --n 1000 --seed 1");
  ok = ok && bench.status == 0 && value_of(bench.out, "queries") == "1000" &&
       !value_of(bench.out, "macro_f1").empty();
  d << "bench mean_ms=" << value_of(bench.out, "mean_ms") << " accuracy=" << value_of(bench.out, "accuracy")
    << " macro_f1=" << value_of(bench.out, "macro_f1");

  const auto seg = run_cli("segment --volume " + at("v.orgv") + " --weights " + at("w.orgc") +
                           " --levels 8,4,2 --out " + at("pred.orgm"));
  ok = ok && seg.status == 0 && !value_of(seg.out, "coarse_seconds").empty();
  d << "; segment coarse_seconds=" << value_of(seg.out, "coarse_seconds")
    << " total_seconds=" << value_of(seg.out, "total_seconds");

  const auto eval = run_cli("eval --pred " + at("pred.orgm") + " --truth " + at("m.orgm"));
  ok = ok && eval.status == 0 && eval.out.find("avg") != std::string::npos;
  d << "; eval voxel_macro_f1=" << value_of(eval.out, "voxel_macro_f1")
    << "; untrained weights on a phantom, so scores are not comparable to BTCV results"
       " (Dice 65.96, accuracy 97.4%, macro-F1 86.76%, 5.24 s / 9.51 s), which need BTCV and trained weights";
  fs::remove_all(dir);
  return {ok, d.str()};
}

}  // namespace

int main() {
  criterion("descriptor geometry: 6561 offsets, exhaustive enumeration, < 1 s", geometry);
  criterion("normalisation: uniform 128 / -1024 / 0 give exactly 1 / -4 / 0", normalization);
  criterion("oracle equivalence: disagreements within 1 finest cell of a boundary, dice >= 0.95, < 60 s",
            oracle_equivalence);
  criterion("parallel determinism: 1 vs max threads bitwise-identical masks", parallel_determinism);
  criterion("call economy: sphere classifier calls <= 20% of voxels, brute force 100%", call_economy);
  criterion("format round-trips: ORGV, ORGM, ORGC, ORGD byte-exact over 100 cases each", round_trips);
  criterion("latency: 4x128 model mean <= 5 ms over 1000 queries, 64^3 vs 256^3 within 20%", latency);
  criterion("experiment protocol: CLI bench (1000 queries) -> segment -> eval runs end to end", protocol);
  std::cout << (failures ? std::to_string(failures) + " criteria failed" : "all criteria passed") << std::endl;
  return failures ? 1 : 0;
}
