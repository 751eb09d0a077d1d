#include "reid/train.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "reid/image_io.hpp"

namespace fs = std::filesystem;

namespace reid {

void SgdMomentum::step(NamedParams& params, const std::vector<Tensor>& grads) {
  if (grads.size() != params.size()) throw ShapeError("sgd: gradient count mismatch");
  for (size_t i = 0; i < params.size(); ++i) {
    auto& [name, var] = params[i];
    const Tensor& g = grads[i];
    if (!g.same_shape(var.value())) throw ShapeError("sgd: gradient shape mismatch for " + name);
    auto it = velocity_.find(name);
    if (it == velocity_.end()) it = velocity_.emplace(name, Tensor::zeros(g.shape())).first;
    Tensor& v = it->second;
    Tensor next = var.value().clone();
    Scalar* pv = v.data();
    Scalar* pp = next.data();
    const Scalar* pg = g.data();
    for (int64_t j = 0, n = g.numel(); j < n; ++j) {
      pv[j] = momentum_ * pv[j] + pg[j];
      pp[j] -= lr_ * pv[j];
    }
    var.set_value(std::move(next));
  }
}

TotalLossOptions loss_options(const RunConfig& cfg) {
  TotalLossOptions opts;
  opts.weights = LossWeights{cfg.lambda1, cfg.lambda2, cfg.sa_alpha};
  opts.mask = MaskParams{cfg.mask_sharpness, cfg.mask_threshold};
  opts.trim_t = cfg.trim_threshold;
  opts.l_align = cfg.l_align;
  opts.enable_ia = cfg.enable_ia;
  opts.enable_sa = cfg.enable_sa;
  return opts;
}

TrainResult train_model(Model& model, const DatasetIndex& data, const RunConfig& cfg,
                        const std::string& out_dir) {
  cfg.validate();
  ImageLoader loader(cfg.image_height, cfg.image_width, cfg.norm_mean, cfg.norm_std);
  PairSampler sampler(data, cfg.batch_size, cfg.positive_fraction, cfg.seed ^ 0x5a3c9eULL);
  Rng flip_rng(cfg.seed ^ 0xf11bULL);
  SgdMomentum opt(cfg.lr, cfg.momentum);
  TotalLossOptions opts = loss_options(cfg);
  NamedParams params = model.named_params();

  int steps_per_epoch =
      std::max<int>(1, static_cast<int>((data.train.size() + cfg.batch_size - 1) / cfg.batch_size));

  TrainResult result;
  std::ofstream metrics;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    metrics.open(fs::path(out_dir) / "metrics.txt");
    if (!metrics) throw IoError("cannot write metrics under " + out_dir);
  }

  bool first_step = true;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    opt.set_lr(epoch > cfg.lr_decay_epoch ? cfg.lr * cfg.lr_decay_factor : cfg.lr);
    EpochLog log;
    log.epoch = epoch;
    log.lr = opt.lr();
    for (int step = 0; step < steps_per_epoch; ++step) {
      PairBatch batch = make_pair_batch(data, sampler.next_indices(), loader, cfg.augment_flip,
                                        cfg.augment_flip ? &flip_rng : nullptr);
      TotalLossResult loss = total_loss(model, batch.images_a, batch.images_b, batch.labels_a,
                                        batch.labels_b, batch.pair_label, opts);
      if (first_step) {
        result.step0_total = loss.total.item();
        first_step = false;
      }
      std::vector<Var> param_vars;
      param_vars.reserve(params.size());
      for (auto& [name, var] : params) param_vars.push_back(var);
      // Ablated objectives legitimately leave some head parameters unreached.
      std::vector<Var> grad_vars =
          grad(loss.total, param_vars, /*create_graph=*/false, Var(), /*allow_unreached=*/true);
      std::vector<Tensor> grads;
      grads.reserve(grad_vars.size());
      for (auto& g : grad_vars) grads.push_back(g.value());
      log.ide += loss.ide;
      log.ia += loss.ia;
      log.sa += loss.sa;
      log.total += loss.total.item();
      grad_vars.clear();
      loss = TotalLossResult{};  // drop the graph before mutating parameters
      opt.step(params, grads);
    }
    log.ide /= steps_per_epoch;
    log.ia /= steps_per_epoch;
    log.sa /= steps_per_epoch;
    log.total /= steps_per_epoch;
    result.history.push_back(log);
    if (metrics.is_open())
      metrics << "epoch=" << log.epoch << " lr=" << format_double(log.lr)
              << " l_ide=" << format_double(log.ide) << " l_ia=" << format_double(log.ia)
              << " l_sa=" << format_double(log.sa) << " total=" << format_double(log.total)
              << "\n";
  }

  if (!out_dir.empty()) {
    std::vector<std::vector<double>> series(4);
    for (const auto& log : result.history) {
      series[0].push_back(log.total);
      series[1].push_back(log.ide);
      series[2].push_back(log.ia);
      series[3].push_back(log.sa);
    }
    render_line_plot("training loss", {"total", "ide", "ia", "sa"}, series,
                     (fs::path(out_dir) / "loss_curve.png").string());
    Checkpoint ck = make_checkpoint(model, cfg, cfg.epochs, opt.state());
    result.checkpoint_path = (fs::path(out_dir) / "checkpoint.bin").string();
    save_checkpoint(result.checkpoint_path, ck);
  }
  return result;
}

Model model_from_checkpoint(const Checkpoint& ck) {
  ModelConfig mc;
  mc.preset = ck.config.backbone;
  mc.num_classes = ck.num_classes;
  mc.head_hidden = ck.config.head_hidden;
  mc.seed = ck.config.seed;
  Model model(mc);
  load_model_params(model, ck);
  return model;
}

TrainResult cmd_train(const RunConfig& cfg) {
  cfg.validate();
  DatasetIndex data = scan_dataset(cfg.data_root);
  ModelConfig mc;
  mc.preset = cfg.backbone;
  mc.num_classes = data.num_train_identities;
  mc.head_hidden = cfg.head_hidden;
  mc.seed = cfg.seed;
  Model model(mc);
  return train_model(model, data, cfg, cfg.output_dir);
}

EvalReport cmd_eval(const std::string& checkpoint_path, const RunConfig& cfg) {
  cfg.validate();
  Checkpoint ck = load_checkpoint(checkpoint_path);
  Model model = model_from_checkpoint(ck);
  DatasetIndex data = scan_dataset(cfg.data_root);
  ImageLoader loader(cfg.image_height, cfg.image_width, cfg.norm_mean, cfg.norm_std);

  EvalOptions opts;
  opts.mode = parse_eval_mode(cfg.eval_mode);
  opts.trim_t = cfg.trim_threshold;
  opts.l_align = cfg.l_align;
  opts.max_gallery = cfg.max_gallery;
  DistanceMatrix dm = fused_distances(model, data, loader, opts);

  EvalReport report;
  report.mode = cfg.eval_mode;
  report.cmc = cmc(dm, cfg.max_rank);
  report.map = mean_average_precision(dm);

  if (!cfg.output_dir.empty()) {
    fs::create_directories(cfg.output_dir);
    auto rank = [&](int k) {
      return report.cmc.curve[std::min<int>(k, static_cast<int>(report.cmc.curve.size()) - 1)];
    };
    std::vector<std::pair<std::string, std::string>> kv = {
        {"mode", report.mode},
        {"queries", std::to_string(dm.q)},
        {"gallery", std::to_string(dm.g)},
        {"evaluated", std::to_string(report.cmc.evaluated)},
        {"skipped", std::to_string(report.cmc.skipped)},
        {"rank1", format_double(rank(0))},
        {"rank5", format_double(rank(4))},
        {"rank10", format_double(rank(9))},
        {"map", format_double(report.map.value)},
    };
    report.results_path = (fs::path(cfg.output_dir) / "results.txt").string();
    write_metrics(report.results_path, kv);
    write_distance_matrix(dm, (fs::path(cfg.output_dir) / "distances.dmat").string());
    render_line_plot("CMC", {"cmc"}, {report.cmc.curve},
                     (fs::path(cfg.output_dir) / "cmc_curve.png").string());
  }
  return report;
}

std::vector<std::string> cmd_export_attention(const std::string& checkpoint_path,
                                              const RunConfig& cfg,
                                              const std::vector<std::string>& images, int label,
                                              const std::string& out_dir) {
  cfg.validate();
  if (images.empty() || images.size() > 2)
    throw ConfigError("export-attention expects one image (with --label) or an image pair");
  Checkpoint ck = load_checkpoint(checkpoint_path);
  Model model = model_from_checkpoint(ck);
  ImageLoader loader(cfg.image_height, cfg.image_width, cfg.norm_mean, cfg.norm_std);
  fs::create_directories(out_dir);

  auto stem = [](const std::string& p) { return fs::path(p).stem().string(); };
  auto split_of = [](const std::string& p) {
    std::string dir = fs::path(p).parent_path().filename().string();
    return (dir == "train" || dir == "query" || dir == "gallery") ? dir : std::string("custom");
  };
  auto map_slice = [](const Var& maps, int row) {
    int h = maps.value().dim(1), w = maps.value().dim(2);
    Tensor out({h, w});
    std::copy(maps.value().data() + static_cast<int64_t>(row) * h * w,
              maps.value().data() + static_cast<int64_t>(row + 1) * h * w, out.data());
    return out;
  };

  std::vector<std::string> written;
  auto emit = [&](const Tensor& map, const std::string& src, const std::string& branch) {
    std::string base =
        (fs::path(out_dir) / (split_of(src) + "_" + stem(src) + "_" + branch)).string();
    save_grayscale_map(map, cfg.image_height, cfg.image_width, base + ".png");
    save_overlay(src, map, base + "_overlay.png");
    written.push_back(base + ".png");
    written.push_back(base + "_overlay.png");
  };

  if (images.size() == 1) {
    if (label < 0 || label >= model.num_classes())
      throw ConfigError("export-attention: --label must be a dense train label in [0, C)");
    Var batch = Var::constant(loader.load_batch({images[0]}));
    IdentificationAttention ia = identification_attention_loss(
        model, batch, {label}, MaskParams{cfg.mask_sharpness, cfg.mask_threshold}, false);
    emit(map_slice(ia.maps, 0), images[0], "id");
  } else {
    SiameseAttention sam = siamese_attention_maps(
        model, Var::constant(loader.load_batch({images[0]})),
        Var::constant(loader.load_batch({images[1]})), /*create_graph=*/false);
    emit(map_slice(sam.m1, 0), images[0], "a");
    emit(map_slice(sam.m2, 0), images[1], "b");
    int la = cfg.l_align > 0 ? cfg.l_align : sam.m1.value().dim(1);
    auto [v1, v2] = trim_and_align(attention_profile(sam.m1), attention_profile(sam.m2),
                                   cfg.trim_threshold, la);
    std::vector<double> p1(v1.value().data(), v1.value().data() + v1.numel());
    std::vector<double> p2(v2.value().data(), v2.value().data() + v2.numel());
    std::string ppath = (fs::path(out_dir) /
                         (split_of(images[0]) + "_" + stem(images[0]) + "_" + stem(images[1]) +
                          "_profiles.txt"))
                            .string();
    save_profiles_text(ppath, p1, p2);
    written.push_back(ppath);
  }
  return written;
}

SynthManifest cmd_generate(const RunConfig& cfg) {
  cfg.validate();
  return generate_synthetic(cfg.data_root, cfg.synth_identities, cfg.synth_images_per_identity,
                            cfg.image_height, cfg.image_width, cfg.synth_cameras, cfg.seed);
}

}  // namespace reid
