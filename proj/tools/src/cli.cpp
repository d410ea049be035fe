#include "lddr_cli/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "lddr/cascade.hpp"
#include "lddr/error.hpp"
#include "lddr/image_io.hpp"
#include "lddr/manifest.hpp"
#include "lddr/metrics.hpp"
#include "lddr/network.hpp"
#include "lddr/parallel.hpp"
#include "lddr/pts.hpp"
#include "lddr/synth.hpp"
#include "lddr/weights.hpp"

namespace lddr::cli {

namespace fs = std::filesystem;

namespace {

// Default standard deviation of randomly initialised conv weights.
constexpr double kDefaultWeightScale = 0.02;

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string general(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Common {
  int threads = 1;
  bool verbose = false;
};

void add_common(CLI::App& sub, Common& c) {
  // Expanded into flags by expand_config() before parsing; kept here for --help.
  sub.add_option("--config", "key = value file; command-line flags take precedence");
  sub.add_option("--threads", c.threads, "worker threads (default: $LDDR_THREADS or 1)")
      ->check(CLI::Range(1, 1024));
  sub.add_flag("-v,--verbose", c.verbose, "progress messages on stderr");
}

// Splices LDDR_THREADS and the `key = value` lines of a --config file into the
// argument list. Precedence: command line, then environment, then file.
std::vector<std::string> expand_args(const CLI::App& app, const std::vector<std::string>& args) {
  if (args.empty()) return args;
  const CLI::App* sub = app.get_subcommand_no_throw(args.front());
  if (sub == nullptr) return args;
  std::optional<std::string> path;
  std::set<std::string> given;
  for (std::size_t i = 1; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a.rfind("--", 0) != 0) continue;
    const auto eq = a.find('=');
    const std::string name = a.substr(0, eq);
    given.insert(name);
    if (name == "--config") {
      if (eq != std::string::npos) {
        path = a.substr(eq + 1);
      } else if (i + 1 < args.size()) {
        path = args[i + 1];
      }
    }
  }

  std::vector<std::string> out(args.begin(), args.begin() + 1);
  if (const char* env = std::getenv("LDDR_THREADS"); env && *env && !given.count("--threads")) {
    given.insert("--threads");
    out.insert(out.end(), {"--threads", env});
  }
  if (path) {
    std::vector<CLI::ConfigItem> items;
    try {
      items = CLI::ConfigINI().from_file(*path);
    } catch (const CLI::FileError&) {
      throw ConfigError("cannot read config file '" + *path + "'");
    }
    for (const auto& item : items) {
      if (item.name == "++" || item.name == "--") continue;
      if (!item.parents.empty()) {
        throw ConfigError("config file '" + *path + "': sections are not supported");
      }
      const std::string flag = "--" + item.name;
      const CLI::Option* opt = sub->get_option_no_throw(flag);
      if (opt == nullptr || flag == "--config") {
        throw ConfigError("config file '" + *path + "': unknown key '" + item.name + "'");
      }
      if (given.count(flag)) continue;
      if (opt->get_expected_min() == 0) {
        const std::string v = item.inputs.empty() ? "true" : item.inputs.front();
        if (v == "true" || v == "1" || v == "on" || v == "yes") {
          out.push_back(flag);
        } else if (!(v == "false" || v == "0" || v == "off" || v == "no")) {
          throw ConfigError("config file '" + *path + "': '" + item.name + "' expects true/false");
        }
        continue;
      }
      for (const auto& v : item.inputs) {
        out.push_back(flag);
        out.push_back(v);
      }
    }
  }
  out.insert(out.end(), args.begin() + 1, args.end());
  return out;
}

std::vector<int> parse_int_list(const std::string& text, const char* what) {
  std::vector<int> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError(std::string("bad ") + what + " list '" + text + "'");
    }
  }
  if (out.empty()) throw ConfigError(std::string("empty ") + what + " list");
  return out;
}

std::vector<StageConfig> stage_configs_from(const std::vector<int>& indices) {
  std::vector<StageConfig> cfgs;
  std::set<int> seen;
  for (int s : indices) {
    if (s < 1 || s > kStageCount) {
      throw ConfigError("stage " + std::to_string(s) + " out of range 1.." +
                        std::to_string(kStageCount));
    }
    if (!seen.insert(s).second) throw ConfigError("stage " + std::to_string(s) + " repeated");
    cfgs.push_back(standard_stage_config(s));
  }
  return cfgs;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  Common common;
  std::string manifest, weights, model, report;
  std::optional<double> lambda;
  std::string stages = "1,2,3,4";
  std::string schedule;
  std::uint64_t seed = 0;
  bool no_flip = false;
  int rotations = 1;
  double max_rotation = 15.0;
  bool no_perturb = false;
  int cv_folds = 5;
};

std::vector<TrainingSample> load_training_set(const std::vector<Sample>& samples, int threads) {
  std::vector<TrainingSample> out(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t i) {
    if (!samples[i].shape) {
      throw InputError("sample '" + samples[i].id + "' has no annotation");
    }
    Tensor image = load_image(samples[i].image_path);
    const FaceBox box = clip_box(samples[i].box, image.width(), image.height());
    out[i] = TrainingSample{std::move(image), box, *samples[i].shape};
  });
  return out;
}

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  const auto t0 = std::chrono::steady_clock::now();
  TrainConfig cfg;
  cfg.stage_configs = stage_configs_from(parse_int_list(a.stages, "stage"));
  cfg.schedule.sizes.clear();
  if (a.schedule.empty()) {
    for (const auto& s : cfg.stage_configs) cfg.schedule.sizes.push_back(s.input_size);
  } else {
    cfg.schedule.sizes = parse_int_list(a.schedule, "schedule");
  }
  cfg.lambda = a.lambda;
  cfg.cv_folds = a.cv_folds;
  cfg.seed = a.seed;
  cfg.augment.flip = !a.no_flip;
  cfg.augment.rotations = a.rotations;
  cfg.augment.max_rotation_deg = a.max_rotation;
  cfg.perturb_initial = !a.no_perturb;
  cfg.threads = a.common.threads;
  cfg.log = [&](std::string_view m) {
    if (a.common.verbose) err << m << '\n';
  };
  if (a.rotations < 0) throw ConfigError("--rotations must be >= 0");
  if (a.cv_folds < 2) throw ConfigError("--cv-folds must be >= 2");

  WeightSet weights = load_weights(a.weights);
  const Engine engine(std::move(weights), cfg.stage_configs);
  const auto samples = load_manifest(a.manifest);
  const auto dataset = load_training_set(samples, a.common.threads);

  TrainReport report;
  const CascadeModel model = train_cascade(dataset, engine, cfg, &report);
  save_model(model, a.model);

  std::ostringstream rep;
  rep << "key\tvalue\n"
      << "seed\t" << a.seed << '\n'
      << "images\t" << dataset.size() << '\n'
      << "samples\t" << report.samples << '\n'
      << "landmarks\t" << model.landmark_count << '\n'
      << "initial_error\t" << general(report.initial_error) << '\n';
  rep << "stage\tpatch\tlambda\terror_before\terror_after\n";
  for (std::size_t t = 0; t < report.stages.size(); ++t) {
    const auto& s = report.stages[t];
    rep << s.stage << '\t' << model.schedule.sizes[t] << '\t' << general(s.lambda) << '\t'
        << general(s.error_before) << '\t' << general(s.error_after) << '\n';
  }
  if (!a.report.empty()) {
    std::ofstream f(a.report, std::ios::binary);
    if (!(f << rep.str())) throw IoError("cannot write report '" + a.report + "'");
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out << rep.str() << "seconds\t" << fixed(secs, 1) << '\n';
  return kOk;
}

// ---------------------------------------------------------------- align

struct AlignArgs {
  Common common;
  std::string manifest, weights, model, out_dir;
};

int cmd_align(const AlignArgs& a, std::ostream& out, std::ostream& err) {
  const CascadeModel model = load_model(a.model);
  const Engine engine(load_weights(a.weights), model.stage_configs);
  model.check_engine(engine);
  const auto samples = load_manifest(a.manifest);

  std::error_code ec;
  fs::create_directories(a.out_dir, ec);
  if (ec || !fs::is_directory(a.out_dir)) {
    throw IoError("cannot create output directory '" + a.out_dir + "'");
  }

  std::vector<std::optional<Shape>> results(samples.size());
  std::vector<std::string> failures(samples.size());
  parallel_for(samples.size(), a.common.threads, [&](std::size_t i) {
    try {
      const Tensor image = load_image(samples[i].image_path);
      const FaceBox box = clip_box(samples[i].box, image.width(), image.height());
      Shape s = predict(model, image, FaceFrame(box), engine);
      if (!s.all_finite()) throw NumericalError("non-finite prediction");
      results[i] = std::move(s);
    } catch (const Error& e) {
      failures[i] = e.what();
    }
  });

  // Written in manifest order regardless of the worker count.
  std::size_t failed = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!results[i]) {
      ++failed;
      err << "align: " << samples[i].id << ": " << failures[i] << '\n';
      continue;
    }
    write_pts(*results[i], (fs::path(a.out_dir) / (samples[i].id + ".pts")).string());
    if (a.common.verbose) err << "aligned " << samples[i].id << '\n';
  }
  out << "aligned\t" << samples.size() - failed << "\nfailed\t" << failed << '\n';
  return failed ? kPartialFailure : kOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  Common common;
  std::string manifest, predictions, ced, per_image;
  std::vector<std::string> protocols{"interpupil68"};
  double ced_max = 0.2;
  int ced_steps = 40;
};

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  if (a.ced_steps < 1 || !(a.ced_max > 0.0)) throw ConfigError("bad CED threshold range");
  std::vector<NmeProtocol> protocols;
  for (const auto& p : a.protocols) protocols.push_back(parse_protocol(p));

  const auto samples = load_manifest(a.manifest);
  if (!fs::is_directory(a.predictions)) {
    throw IoError("predictions directory '" + a.predictions + "' not found");
  }
  std::set<std::string> predicted;
  for (const auto& entry : fs::directory_iterator(a.predictions)) {
    if (entry.path().extension() == ".pts") predicted.insert(entry.path().stem().string());
  }
  std::vector<std::string> missing;
  std::set<std::string> gt_ids;
  for (const auto& s : samples) {
    if (!s.shape) throw InputError("ground-truth sample '" + s.id + "' has no annotation");
    gt_ids.insert(s.id);
    if (!predicted.count(s.id)) missing.push_back(s.id);
  }
  std::vector<std::string> extra;
  for (const auto& id : predicted) {
    if (!gt_ids.count(id)) extra.push_back(id);
  }
  if (samples.empty() || missing.size() == samples.size()) {
    throw InputError("no identifiers shared between ground truth and predictions");
  }
  if (!missing.empty() || !extra.empty()) {
    std::string msg = "identifier mismatch:";
    for (const auto& id : missing) msg += " missing prediction '" + id + "';";
    for (const auto& id : extra) msg += " unexpected prediction '" + id + "';";
    throw InputError(msg);
  }

  std::vector<Shape> preds, gts;
  std::vector<FaceBox> boxes;
  for (const auto& s : samples) {
    preds.push_back(read_pts((fs::path(a.predictions) / (s.id + ".pts")).string()));
    gts.push_back(*s.shape);
    boxes.push_back(s.box);
  }

  std::vector<double> thresholds;
  for (int i = 0; i <= a.ced_steps; ++i) thresholds.push_back(a.ced_max * i / a.ced_steps);

  out << "protocol\tmean_nme\tevaluated\tdegenerate\n";
  std::string ced_text, per_image_text = "id\tprotocol\tnme\n";
  for (const auto protocol : protocols) {
    const NmeResult r = evaluate_nme(preds, gts, protocol, boxes);
    out << to_string(protocol) << '\t' << fixed(r.mean, 5) << '\t' << r.per_image.size() << '\t'
        << r.degenerate.size() << '\n';
    for (std::size_t d : r.degenerate) {
      err << "eval: " << samples[d].id << ": zero normaliser under " << to_string(protocol)
          << ", excluded\n";
    }
    for (std::size_t k = 0; k < r.per_image.size(); ++k) {
      per_image_text += samples[r.evaluated[k]].id + '\t' + to_string(protocol) + '\t' +
                        general(r.per_image[k]) + '\n';
    }
    if (!r.per_image.empty()) {
      if (protocols.size() > 1) ced_text += std::string("# ") + to_string(protocol) + '\n';
      ced_text += format_ced(ced_curve(r.per_image, thresholds));
    }
  }
  if (!a.ced.empty()) {
    std::ofstream f(a.ced, std::ios::binary);
    if (!(f << ced_text)) throw IoError("cannot write CED file '" + a.ced + "'");
  }
  if (!a.per_image.empty()) {
    std::ofstream f(a.per_image, std::ios::binary);
    if (!(f << per_image_text)) throw IoError("cannot write '" + a.per_image + "'");
  }
  return kOk;
}

// ---------------------------------------------------------------- net-info

struct NetInfoArgs {
  Common common;
  std::optional<int> stage;
  std::string preset = "standard";
  std::optional<int> input;
};

void print_geometry(std::ostream& out, const std::string& label, const StageConfig& cfg,
                    int input) {
  for (const auto& g : output_geometry(cfg, input)) {
    out << label << '\t' << input << '\t' << g.name << '\t' << g.out_h << '\t' << g.out_w << '\t'
        << g.out_c << '\t' << g.rf << '\t' << g.jump << '\n';
  }
}

int cmd_net_info(const NetInfoArgs& a, std::ostream& out, std::ostream&) {
  const std::string header = "stage\tinput\tlayer\tout_h\tout_w\tout_c\trf\tjump\n";
  if (a.preset == "original") {
    if (a.stage) throw ConfigError("--stage does not apply to the original preset");
    out << header;
    const StageConfig cfg = original_network_config();
    const int input = a.input.value_or(cfg.input_size);
    print_geometry(out, "original", cfg, input);
    const auto conv5 = receptive_field(cfg.layers, "conv5");
    const auto pool5 = receptive_field(cfg.layers, "pool5");
    out << "summary\tstage\tmin_input\n"
        << "summary\toriginal\t" << min_input_size(cfg) << '\n'
        << "rf\tconv5\t" << conv5.rf << '\n'
        << "rf\tpool5\t" << pool5.rf << '\n'
        << "note\tthe commonly quoted 195x195 receptive field is that of pool5; the last "
           "convolution (conv5) sees "
        << conv5.rf << "x" << conv5.rf << " pixels\n";
    return kOk;
  }
  if (a.preset != "standard") throw ConfigError("unknown preset '" + a.preset + "'");
  std::vector<int> stages;
  if (a.stage) {
    if (*a.stage < 1 || *a.stage > kStageCount) {
      throw ConfigError("--stage must be in 1.." + std::to_string(kStageCount));
    }
    stages.push_back(*a.stage);
  } else {
    for (int s = 1; s <= kStageCount; ++s) stages.push_back(s);
  }
  out << header;
  std::string summary = "summary\tstage\tmin_input\n";
  for (int s : stages) {
    const StageConfig cfg = standard_stage_config(s);
    print_geometry(out, std::to_string(s), cfg, a.input.value_or(cfg.input_size));
    summary += "summary\t" + std::to_string(s) + '\t' + std::to_string(min_input_size(cfg)) + '\n';
  }
  out << summary;
  return kOk;
}

// ---------------------------------------------------------------- synth / init-weights

struct SynthArgs {
  Common common;
  SynthSpec spec;
  std::string out_dir;
};

int cmd_synth(const SynthArgs& a, std::ostream& out, std::ostream&) {
  const SynthOutput result = synth_generate(a.spec, a.out_dir, a.common.threads);
  out << "manifest\t" << result.manifest_path << "\ncount\t" << result.entries.size()
      << "\nseed\t" << a.spec.seed << '\n';
  return kOk;
}

struct InitWeightsArgs {
  Common common;
  std::uint64_t seed = 0;
  double scale = kDefaultWeightScale;
  std::string out_path;
};

int cmd_init_weights(const InitWeightsArgs& a, std::ostream& out, std::ostream&) {
  if (!(a.scale > 0.0)) throw ConfigError("--scale must be positive");
  const WeightSet w = init_random_weights(a.seed, a.scale);
  save_weights(w, a.out_path);
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(w.hash()));
  out << "weights\t" << a.out_path << "\nseed\t" << a.seed << "\nhash\t" << hash << '\n';
  return kOk;
}

int exit_code_for(const std::exception_ptr& e, std::ostream& err) {
  try {
    std::rethrow_exception(e);
  } catch (const ConfigError& x) {
    err << "error: " << x.what() << '\n';
    return kConfigError;
  } catch (const GeometryError& x) {
    err << "error: " << x.what() << '\n';
    return kConfigError;
  } catch (const NumericalError& x) {
    err << "error: " << x.what() << '\n';
    return kNumericalError;
  } catch (const Error& x) {
    err << "error: " << x.what() << '\n';
    return kDataError;
  } catch (const std::bad_alloc&) {
    err << "error: out of memory\n";
    return kDataError;
  } catch (const std::exception& x) {
    err << "error: " << x.what() << '\n';
    return kDataError;
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cascaded facial landmark regression over local deep descriptors", "lddr"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* t = app.add_subcommand("train", "train a cascade from an annotated manifest");
  add_common(*t, train.common);
  t->add_option("--manifest", train.manifest, "training manifest")->required();
  t->add_option("--weights", train.weights, "descriptor network weights")->required();
  t->add_option("--model", train.model, "output model file")->required();
  t->add_option("--report", train.report, "write the training report (TSV) here");
  t->add_option("--lambda", train.lambda, "fixed ridge penalty (default: cross-validated)")
      ->check(CLI::NonNegativeNumber);
  t->add_option("--cv-folds", train.cv_folds, "folds for lambda selection");
  t->add_option("--stages", train.stages, "comma-separated stage networks, in cascade order");
  t->add_option("--schedule", train.schedule, "comma-separated patch sizes (one per stage)");
  t->add_option("--seed", train.seed, "augmentation / initialisation seed");
  t->add_flag("--no-flip", train.no_flip, "disable mirrored copies");
  t->add_option("--rotations", train.rotations, "rotated copies per face");
  t->add_option("--max-rotation", train.max_rotation, "rotation range in degrees");
  t->add_flag("--no-perturb", train.no_perturb, "start every sample from the mean shape");

  AlignArgs align;
  auto* al = app.add_subcommand("align", "predict landmarks for every manifest entry");
  add_common(*al, align.common);
  al->add_option("--manifest", align.manifest, "faces to align")->required();
  al->add_option("--weights", align.weights, "descriptor network weights")->required();
  al->add_option("--model", align.model, "trained model")->required();
  al->add_option("--out-dir", align.out_dir, "directory for <id>.pts predictions")->required();

  EvalArgs eval;
  auto* ev = app.add_subcommand("eval", "score predictions against ground truth");
  add_common(*ev, eval.common);
  ev->add_option("--manifest", eval.manifest, "ground-truth manifest")->required();
  ev->add_option("--predictions", eval.predictions, "directory of <id>.pts predictions")
      ->required();
  ev->add_option("--protocol", eval.protocols,
                 "interpupil68 | interpupil49 | eye_nose_3pt | facesize (repeatable)");
  ev->add_option("--ced", eval.ced, "write the CED curve (TSV) here");
  ev->add_option("--ced-max", eval.ced_max, "largest CED threshold");
  ev->add_option("--ced-steps", eval.ced_steps, "CED threshold count minus one");
  ev->add_option("--per-image", eval.per_image, "write per-image errors (TSV) here");

  NetInfoArgs info;
  auto* ni = app.add_subcommand("net-info", "print layer geometry and receptive fields");
  add_common(*ni, info.common);
  ni->add_option("--stage", info.stage, "only this stage (1-4)");
  ni->add_option("--preset", info.preset, "standard | original");
  ni->add_option("--input", info.input, "override the input size");

  SynthArgs synth;
  auto* sy = app.add_subcommand("synth", "render a synthetic annotated face set");
  add_common(*sy, synth.common);
  sy->add_option("--out-dir", synth.out_dir, "output directory")->required();
  sy->add_option("--count", synth.spec.count, "number of faces");
  sy->add_option("--seed", synth.spec.seed, "generator seed");
  sy->add_option("--image-size", synth.spec.image_size, "square image size in pixels");
  sy->add_option("--min-scale", synth.spec.min_scale);
  sy->add_option("--max-scale", synth.spec.max_scale);
  sy->add_option("--max-rotation", synth.spec.max_rotation_deg, "degrees");
  sy->add_option("--max-shift", synth.spec.max_shift, "fraction of the image size");
  sy->add_option("--expression", synth.spec.expression, "expression range multiplier");
  sy->add_option("--box-jitter", synth.spec.box_jitter);
  sy->add_option("--noise", synth.spec.noise, "pixel noise standard deviation");

  InitWeightsArgs init;
  auto* iw = app.add_subcommand("init-weights", "write seeded random descriptor weights");
  add_common(*iw, init.common);
  iw->add_option("--out", init.out_path, "output weights file")->required();
  iw->add_option("--seed", init.seed, "weight seed");
  iw->add_option("--scale", init.scale, "weight standard deviation");

  try {
    const auto expanded = expand_args(app, args);
    std::vector<std::string> reversed(expanded.rbegin(), expanded.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    const auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << sub->help();
    return kConfigError;
  }

  try {
    if (t->parsed()) return cmd_train(train, out, err);
    if (al->parsed()) return cmd_align(align, out, err);
    if (ev->parsed()) return cmd_eval(eval, out, err);
    if (ni->parsed()) return cmd_net_info(info, out, err);
    if (sy->parsed()) return cmd_synth(synth, out, err);
    if (iw->parsed()) return cmd_init_weights(init, out, err);
  } catch (...) {
    return exit_code_for(std::current_exception(), err);
  }
  return kConfigError;
}

}  // namespace lddr::cli
