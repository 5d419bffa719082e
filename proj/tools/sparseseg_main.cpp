// sparseseg command-line front end.
//
// Exit codes: 0 success, 2 usage error, 3 input parse error,
// 4 dimension/consistency error.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sparseseg/dataset.hpp"
#include "sparseseg/metrics.hpp"
#include "sparseseg/model.hpp"
#include "sparseseg/sampler.hpp"
#include "sparseseg/segmenter.hpp"
#include "sparseseg/volume.hpp"

using namespace sparseseg;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitParse = 3;
constexpr int kExitConsistency = 4;

using Clock = std::chrono::steady_clock;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch:
    case ErrorCode::SpacingMismatch:
    case ErrorCode::NonPositiveSpacing:
    case ErrorCode::EmptyMask:
    case ErrorCode::EmptyCounts:
      return kExitConsistency;
    case ErrorCode::InvalidArgument:
      return kExitUsage;
    default:
      return kExitParse;
  }
}

std::vector<float> parse_levels(const std::string& text) {
  std::vector<float> levels;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::size_t used = 0;
    float value = 0.0f;
    try {
      value = std::stof(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size() || !(value > 0.0f))
      throw Error(ErrorCode::InvalidArgument, "bad level '" + item + "' in --levels");
    levels.push_back(value);
  }
  if (levels.empty()) throw Error(ErrorCode::InvalidArgument, "--levels is empty");
  for (std::size_t i = 1; i < levels.size(); ++i)
    if (!(levels[i] < levels[i - 1]))
      throw Error(ErrorCode::InvalidArgument, "--levels must be strictly decreasing");
  return levels;
}

Index3 to_index(const std::vector<int>& p) { return Index3(p[0], p[1], p[2]); }

void require_inside(const Volume& v, const Index3& p) {
  if (!v.contains(p))
    throw Error(ErrorCode::DimensionMismatch, "point lies outside the volume");
}

std::string join(const Eigen::VectorXf& values) {
  std::ostringstream out;
  out << std::setprecision(6);
  for (Eigen::Index i = 0; i < values.size(); ++i) out << (i ? " " : "") << values[i];
  return out.str();
}

std::string stem(const std::string& path) {
  auto name = path.substr(path.find_last_of('/') + 1);
  return name.substr(0, name.find('.'));
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot create " + path);
  out << text;
}

// --- subcommands -----------------------------------------------------------

struct ClassifyArgs {
  std::string volume, weights;
  std::vector<int> point;
};

int run_classify(const ClassifyArgs& a) {
  const Volume v = load_volume(a.volume);
  const ModelWeights w = load_weights_file(a.weights);
  const ModelPointClassifier classifier(w, v.spacing());
  const Index3 p = to_index(a.point);
  require_inside(v, p);

  const auto start = Clock::now();
  const auto result = classifier.predict(v, p);
  const auto elapsed = std::chrono::duration_cast<std::chrono::microseconds>(Clock::now() - start);

  std::cout << "label=" << w.label_names[result.argmax_label] << '\n'
            << "label_index=" << result.argmax_label << '\n'
            << "probabilities=" << join(result.probs) << '\n'
            << "elapsed_us=" << elapsed.count() << '\n';
  return 0;
}

struct BenchArgs {
  std::string volume, weights, mask;
  int n = 1000;
  std::uint64_t seed = 0;
};

int run_bench(const BenchArgs& a) {
  if (a.n < 1) throw Error(ErrorCode::InvalidArgument, "--n must be positive");
  const Volume v = load_volume(a.volume);
  const ModelWeights w = load_weights_file(a.weights);
  const ModelPointClassifier classifier(w, v.spacing());
  std::optional<LabelMask> truth;
  if (!a.mask.empty()) {
    truth = load_mask(a.mask);
    if (!same_grid(v, *truth)) throw Error(ErrorCode::DimensionMismatch, "mask does not match volume");
  }

  std::mt19937_64 rng(a.seed);
  std::vector<double> ms;
  ms.reserve(static_cast<std::size_t>(a.n));
  ConfusionCounts counts(std::max(w.num_classes(), truth ? truth->num_classes() : 0));
  for (int q = 0; q < a.n; ++q) {
    const auto idx = uniform_index(rng, v.size());
    const Index3 p(static_cast<int>(idx % v.dims().x()),
                   static_cast<int>((idx / v.dims().x()) % v.dims().y()),
                   static_cast<int>(idx / (std::uint64_t(v.dims().x()) * v.dims().y())));
    const auto start = Clock::now();
    const auto label = classifier.classify(v, p);
    ms.push_back(std::chrono::duration<double, std::milli>(Clock::now() - start).count());
    if (truth) counts.add(truth->at(p), label);
  }

  const double mean = std::accumulate(ms.begin(), ms.end(), 0.0) / ms.size();
  double var = 0.0;
  for (double t : ms) var += (t - mean) * (t - mean);
  const double stddev = std::sqrt(var / ms.size());

  std::cout << std::fixed << std::setprecision(4) << "queries=" << a.n << '\n'
            << "mean_ms=" << mean << '\n'
            << "std_ms=" << stddev << '\n';
  if (truth) {
    const auto scores = accuracy_and_macro_f1(counts);
    std::cout << "accuracy=" << scores.accuracy << '\n' << "macro_f1=" << scores.macro_f1 << '\n';
  }
  return 0;
}

struct SegmentArgs {
  std::string volume, weights, oracle, out, levels = "8,4,2";
  int threads = 0;
  int threshold = 20;
};

int run_segment(const SegmentArgs& a) {
  SegmentOptions options;
  options.levels_mm = parse_levels(a.levels);
  options.threads = a.threads;
  options.majority_threshold = a.threshold;
  const Volume v = load_volume(a.volume);

  std::optional<ModelWeights> weights;
  std::optional<LabelMask> oracle_mask;
  std::unique_ptr<PointClassifier> classifier;
  if (!a.weights.empty()) {
    weights = load_weights_file(a.weights);
    classifier = std::make_unique<ModelPointClassifier>(*weights, v.spacing());
  } else {
    oracle_mask = load_mask(a.oracle);
    if (!same_grid(v, *oracle_mask))
      throw Error(ErrorCode::DimensionMismatch, "oracle mask does not match volume");
    classifier = std::make_unique<GroundTruthClassifier>(*oracle_mask);
  }

  const auto result = segment(v, *classifier, options);
  io::write_file(a.out, write_mask(result.mask));

  const auto& stats = result.stats;
  std::cout << "levels=" << a.levels << '\n';
  for (std::size_t i = 0; i < stats.levels.size(); ++i) {
    const auto& l = stats.levels[i];
    const std::string key = "level" + std::to_string(i) + ".";
    std::cout << key << "spacing_mm=" << l.spacing_mm << '\n'
              << key << "stride=" << l.stride.x() << ',' << l.stride.y() << ',' << l.stride.z() << '\n'
              << key << "grid_points=" << l.grid_points << '\n'
              << key << "unanimous=" << l.unanimous << '\n'
              << key << "smoothed=" << l.smoothed << '\n'
              << key << "classifier_calls=" << l.classifier_calls << '\n'
              << key << "seconds=" << l.seconds << '\n';
  }
  std::cout << "voxels=" << v.size() << '\n'
            << "classifier_calls=" << stats.classifier_calls() << '\n'
            << "smoothed_assignments=" << stats.smoothed_assignments() << '\n'
            << "coarse_seconds=" << stats.levels.front().seconds << '\n'
            << "total_seconds=" << stats.seconds() << '\n';
  return 0;
}

struct ExtractArgs {
  std::string volume, mask, out, manifest, volume_id;
  std::int64_t count = 100000;
  double balanced = 0.10;
  std::uint64_t seed = 0;
  int threads = 0;
};

int run_extract(const ExtractArgs& a) {
  const Volume v = load_volume(a.volume);
  const LabelMask m = load_mask(a.mask);
  const SampleSpec spec{a.count, a.balanced, a.seed};
  const auto table = bind_to_spacing(canonical_offset_table(), v.spacing());
  const auto data =
      build_dataset(v, m, spec, table, a.volume_id.empty() ? stem(a.volume) : a.volume_id, a.threads);
  io::write_file(a.out, write_dataset(data));
  write_text(a.manifest.empty() ? a.out + ".manifest" : a.manifest, write_manifest(data));
  std::cout << "rows=" << data.count() << '\n' << "dim=" << data.descriptor_dim() << '\n';
  return 0;
}

struct DecodeArgs {
  std::string volume, out;
  std::vector<int> point;
};

int run_decode(const DecodeArgs& a) {
  const Volume v = load_volume(a.volume);
  const auto table = bind_to_spacing(canonical_offset_table(), v.spacing());
  const auto d = extract_descriptor(v, to_index(a.point), table);
  const DecodedImage image = decode_descriptor(d.values);

  std::ofstream out(a.out, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot create " + a.out);
  out << "P5\n" << image.cols() << ' ' << image.rows() << "\n255\n";
  for (Eigen::Index r = 0; r < image.rows(); ++r)
    for (Eigen::Index c = 0; c < image.cols(); ++c) {
      const float unit = (image(r, c) + kDescriptorClip) / (2 * kDescriptorClip);
      out.put(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(unit, 0.0f, 1.0f) * 255))));
    }
  return 0;
}

struct EvalArgs {
  std::string pred, truth, csv, weights;
};

int run_eval(const EvalArgs& a) {
  const LabelMask pred = load_mask(a.pred);
  const LabelMask truth = load_mask(a.truth);
  std::vector<std::string> names;
  if (!a.weights.empty()) names = load_weights_file(a.weights).label_names;
  const int classes = std::max({pred.num_classes(), truth.num_classes(), static_cast<int>(names.size())});
  if (static_cast<int>(names.size()) < classes) names = default_label_names(classes);

  const auto dice = dice_per_class(pred, truth, classes);
  const auto scores = accuracy_and_macro_f1(confusion_from_masks(pred, truth, classes));

  std::size_t width = 5;
  for (const auto& n : names) width = std::max(width, n.size());
  std::cout << std::fixed << std::setprecision(4);
  for (int c = 1; c < classes; ++c)
    std::cout << std::left << std::setw(static_cast<int>(width)) << names[c] << "  dice=" << dice[c - 1] << '\n';
  std::cout << std::left << std::setw(static_cast<int>(width)) << "avg" << "  dice=" << mean(dice) << '\n'
            << "voxel_accuracy=" << scores.accuracy << '\n'
            << "voxel_macro_f1=" << scores.macro_f1 << '\n';

  if (!a.csv.empty()) {
    std::ostringstream csv;
    csv << std::fixed << std::setprecision(6) << "class,name,dice\n";
    for (int c = 1; c < classes; ++c) csv << c << ',' << names[c] << ',' << dice[c - 1] << '\n';
    csv << "avg,avg," << mean(dice) << '\n';
    write_text(a.csv, csv.str());
  }
  return 0;
}

struct LogitsArgs {
  std::string weights, dataset, out;
};

int run_logits(const LogitsArgs& a) {
  const ModelWeights w = load_weights_file(a.weights);
  const auto data = read_dataset(io::read_file(a.dataset));
  std::ostringstream text;
  text << std::setprecision(9);
  for (Eigen::Index r = 0; r < data.rows.rows(); ++r) {
    const Eigen::VectorXf logits = forward(w, data.rows.row(r).transpose());
    for (Eigen::Index c = 0; c < logits.size(); ++c) text << (c ? " " : "") << logits[c];
    text << '\n';
  }
  if (a.out.empty())
    std::cout << text.str();
  else
    write_text(a.out, text.str());
  return 0;
}

struct PhantomArgs {
  std::string kind = "sphere", out_volume, out_mask;
  int size = 64;
  float spacing = 2.0f;
};

int run_phantom(const PhantomArgs& a) {
  const auto phantom = synth_phantom(standard_phantom(a.kind, a.size, a.spacing), kPhantomBackground);
  io::write_file(a.out_volume, write_raw(phantom.volume));
  io::write_file(a.out_mask, write_mask(phantom.mask));
  return 0;
}

struct InitModelArgs {
  std::string out;
  int classes = 14, hidden = 128, blocks = 4;
  std::uint64_t seed = 0;
  bool zero = false;
};

int run_init_model(const InitModelArgs& a) {
  if (a.classes < 2 || a.hidden < 1 || a.blocks < 1)
    throw Error(ErrorCode::InvalidArgument, "classes >= 2, hidden >= 1, blocks >= 1 required");
  auto names = default_label_names(a.classes);
  const auto w = a.zero ? ModelWeights::zeros(kDescriptorSize, a.hidden, a.blocks, names)
                        : make_random_weights(kDescriptorSize, a.hidden, a.blocks, names, a.seed);
  io::write_file(a.out, save_weights(w));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse-descriptor organ point classification and segmentation"};
  app.require_subcommand(1);

  ClassifyArgs classify;
  auto* c = app.add_subcommand("classify", "Label a single voxel");
  c->add_option("--volume", classify.volume, "Input volume (.nii or .orgv)")->required()->check(CLI::ExistingFile);
  c->add_option("--weights", classify.weights, "ORGC weights")->required()->check(CLI::ExistingFile);
  c->add_option("--point", classify.point, "Voxel index i j k")->required()->expected(3);

  BenchArgs bench;
  auto* b = app.add_subcommand("bench", "Time random point queries");
  b->add_option("--volume", bench.volume)->required()->check(CLI::ExistingFile);
  b->add_option("--weights", bench.weights)->required()->check(CLI::ExistingFile);
  b->add_option("--mask", bench.mask, "Ground-truth mask for accuracy")->check(CLI::ExistingFile);
  b->add_option("--n", bench.n, "Number of queries")->capture_default_str();
  b->add_option("--seed", bench.seed)->capture_default_str();

  SegmentArgs seg;
  auto* s = app.add_subcommand("segment", "Coarse-to-fine full-volume segmentation");
  s->add_option("--volume", seg.volume)->required()->check(CLI::ExistingFile);
  auto* weights_opt = s->add_option("--weights", seg.weights)->check(CLI::ExistingFile);
  auto* oracle_opt = s->add_option("--oracle", seg.oracle, "Classify by reading this mask instead")
                         ->check(CLI::ExistingFile);
  weights_opt->excludes(oracle_opt);
  s->add_option("--levels", seg.levels, "Grid spacings in mm, strictly decreasing")->capture_default_str();
  s->add_option("--threads", seg.threads, "Worker threads (0 = default)")->capture_default_str();
  s->add_option("--threshold", seg.threshold, "Majority count out of 27")->capture_default_str();
  s->add_option("--out", seg.out, "Output ORGM mask")->required();

  ExtractArgs ext;
  auto* e = app.add_subcommand("extract", "Write an ORGD training dataset");
  e->add_option("--volume", ext.volume)->required()->check(CLI::ExistingFile);
  e->add_option("--mask", ext.mask)->required()->check(CLI::ExistingFile);
  e->add_option("--out", ext.out)->required();
  e->add_option("--manifest", ext.manifest, "Manifest path (default: <out>.manifest)");
  e->add_option("--volume-id", ext.volume_id);
  e->add_option("--count", ext.count)->capture_default_str();
  e->add_option("--balanced", ext.balanced)->capture_default_str()->check(CLI::Range(0.0, 1.0));
  e->add_option("--seed", ext.seed)->capture_default_str();
  e->add_option("--threads", ext.threads)->capture_default_str();

  DecodeArgs dec;
  auto* d = app.add_subcommand("decode", "Write the 81x81 descriptor image as PGM");
  d->add_option("--volume", dec.volume)->required()->check(CLI::ExistingFile);
  d->add_option("--point", dec.point)->required()->expected(3);
  d->add_option("--out", dec.out)->required();

  EvalArgs ev;
  auto* v = app.add_subcommand("eval", "Dice and voxel metrics between two masks");
  v->add_option("--pred", ev.pred)->required()->check(CLI::ExistingFile);
  v->add_option("--truth", ev.truth)->required()->check(CLI::ExistingFile);
  v->add_option("--weights", ev.weights, "Take class names from these weights")->check(CLI::ExistingFile);
  v->add_option("--csv", ev.csv);

  LogitsArgs lg;
  auto* l = app.add_subcommand("logits", "Raw network outputs for every row of an ORGD file");
  l->add_option("--weights", lg.weights)->required()->check(CLI::ExistingFile);
  l->add_option("--dataset", lg.dataset)->required()->check(CLI::ExistingFile);
  l->add_option("--out", lg.out);

  PhantomArgs ph;
  auto* p = app.add_subcommand("phantom", "Write a synthetic volume and its mask");
  p->add_option("--kind", ph.kind)->check(CLI::IsMember({"sphere", "nested", "boxes"}))->capture_default_str();
  p->add_option("--size", ph.size)->capture_default_str()->check(CLI::PositiveNumber);
  p->add_option("--spacing", ph.spacing)->capture_default_str()->check(CLI::PositiveNumber);
  p->add_option("--out-volume", ph.out_volume)->required();
  p->add_option("--out-mask", ph.out_mask)->required();

  InitModelArgs im;
  auto* i = app.add_subcommand("init-model", "Write untrained ORGC weights");
  i->add_option("--out", im.out)->required();
  i->add_option("--classes", im.classes)->capture_default_str();
  i->add_option("--hidden", im.hidden)->capture_default_str();
  i->add_option("--blocks", im.blocks)->capture_default_str();
  i->add_option("--seed", im.seed)->capture_default_str();
  i->add_flag("--zero", im.zero, "All-zero weights");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*c) return run_classify(classify);
    if (*b) return run_bench(bench);
    if (*s) {
      if (seg.weights.empty() && seg.oracle.empty())
        throw Error(ErrorCode::InvalidArgument, "segment needs --weights or --oracle");
      return run_segment(seg);
    }
    if (*e) return run_extract(ext);
    if (*d) return run_decode(dec);
    if (*v) return run_eval(ev);
    if (*l) return run_logits(lg);
    if (*p) return run_phantom(ph);
    if (*i) return run_init_model(im);
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << '\n';
    return exit_code_for(err.code());
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitParse;
  }
  return kExitUsage;
}
