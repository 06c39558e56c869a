#include "zsnav/linalg.hpp"
#include "zsnav/server.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <cstdlib>
#include <iostream>

using namespace zsnav;

namespace {

volatile std::sig_atomic_t g_stop = 0;
void on_signal(int) { g_stop = 1; }

std::shared_ptr<const FeatureDataset> load_dataset(const std::string& features, const std::string& split) {
  return std::make_shared<const FeatureDataset>(load_feature_table(features, read_split(split)));
}

std::string fmt(const std::optional<double>& v) { return v ? format_double(*v) : "n/a"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"zsnav: interactive zero-shot classifier builder"};
  app.require_subcommand(1);

  std::string features, split, matrix_path, gt_path, out, mode = "hint-guided", bind, log_path;
  Index d = 500;
  std::uint64_t seed = 0;
  int attrs = 15, reps = 1;

  auto* serve = app.add_subcommand("serve", "serve the HTTP API over one session");
  serve->add_option("--features", features, "feature table (.csv or .bin)")->required();
  serve->add_option("--split", split, "split JSON")->required();
  serve->add_option("--d", d, "mutual-space dimension")->capture_default_str();
  serve->add_option("--seed", seed, "random seed")->capture_default_str();
  serve->add_option("--bind", bind, "host:port (default $ZSNAV_BIND or 127.0.0.1:8080)");
  serve->add_option("--out", out, "session directory flushed after every commit and on shutdown");

  SyntheticParams sp;
  bool binary = false;
  auto* synth = app.add_subcommand("synth", "write a seeded synthetic dataset with its ground-truth matrix");
  synth->add_option("--seed", sp.seed, "random seed")->required();
  synth->add_option("--out", out, "output directory")->required();
  synth->add_option("--classes", sp.n_classes, "number of classes")->capture_default_str();
  synth->add_option("--seen", sp.n_seen, "number of seen classes")->capture_default_str();
  synth->add_option("--gt-attrs", sp.gt_attributes, "ground-truth attributes")->capture_default_str();
  synth->add_option("--dim", sp.dim, "feature dimension")->capture_default_str();
  synth->add_option("--per-class", sp.per_class, "instances per class")->capture_default_str();
  synth->add_option("--noise", sp.noise, "instance noise sigma")->capture_default_str();
  synth->add_flag("--binary", binary, "also write features.bin with its manifest");

  auto* simulate = app.add_subcommand("simulate", "run simulated-oracle sessions");
  simulate->add_option("--features", features, "feature table")->required();
  simulate->add_option("--split", split, "split JSON")->required();
  simulate->add_option("--gt", gt_path, "ground-truth matrix CSV")->required();
  simulate->add_option("--d", d, "mutual-space dimension")->capture_default_str();
  simulate->add_option("--seed", seed, "base seed; repetition r uses seed + r")->required();
  simulate->add_option("--out", out, "output directory")->required();
  simulate->add_option("--mode", mode, "hint-guided or random")->capture_default_str()->check(CLI::IsMember({"hint-guided", "random"}));
  simulate->add_option("--attrs", attrs, "attributes per session")->capture_default_str();
  simulate->add_option("--reps", reps, "repetitions")->capture_default_str();

  auto* evaluate = app.add_subcommand("evaluate", "train on a class-attribute matrix and report accuracy");
  evaluate->add_option("--features", features, "feature table")->required();
  evaluate->add_option("--split", split, "split JSON")->required();
  evaluate->add_option("--matrix", matrix_path, "class-attribute matrix CSV")->required();
  evaluate->add_option("--d", d, "mutual-space dimension")->capture_default_str();
  evaluate->add_option("--seed", seed, "random seed (recorded only)")->capture_default_str();
  evaluate->add_option("--out", out, "optional JSON result file");

  auto* replay = app.add_subcommand("replay", "re-execute a session log and write the session directory");
  replay->add_option("--features", features, "feature table")->required();
  replay->add_option("--split", split, "split JSON")->required();
  replay->add_option("--log", log_path, "session_log.jsonl")->required();
  replay->add_option("--out", out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*synth) {
      const SyntheticData data = generate_synthetic(sp);
      const std::filesystem::path dir(out);
      std::filesystem::create_directories(dir);
      write_feature_table(dir / "features.csv", data.dataset);
      if (binary) write_feature_binary(dir / "features.bin", data.dataset);
      ClassSplit cs;
      for (int c : data.dataset.seen_classes) cs.seen.push_back(data.dataset.class_names[static_cast<size_t>(c)]);
      for (int c : data.dataset.unseen_classes) cs.unseen.push_back(data.dataset.class_names[static_cast<size_t>(c)]);
      write_split(dir / "split.json", cs);
      write_text_file(dir / "gt.csv", format_binary_table(to_named_table(data.ground_truth, data.dataset)));
      std::cout << "wrote " << data.dataset.size() << " instances, " << data.dataset.n_classes() << " classes, "
                << data.ground_truth.n_attributes() << " attributes to " << dir.string() << "\n";
      return 0;
    }

    if (*simulate) {
      if (attrs < 0) fail(ErrorKind::invalid_argument, "--attrs must be non-negative");
      if (reps < 1) fail(ErrorKind::invalid_argument, "--reps must be at least 1");
      const OracleMode m = parse_oracle_mode(mode);
      auto ds = load_dataset(features, split);
      const GroundTruthMatrix gt = align_ground_truth(read_binary_table(gt_path), *ds);
      const std::filesystem::path dir(out);
      std::filesystem::create_directories(dir);
      std::string merged = "attribute_count,train_acc,test_acc,rep,seed\n";
      double final_sum = 0.0;
      int final_n = 0;
      for (int r = 0; r < reps; ++r) {
        const std::uint64_t rep_seed = seed + static_cast<std::uint64_t>(r);
        SessionConfig cfg;
        cfg.d = d;
        cfg.seed = rep_seed;
        cfg.compute_layout = false;
        cfg.features_path = features;
        cfg.split_path = split;
        Session s(ds, cfg);
        const auto rows = run_oracle_session(s, gt, attrs, m, rep_seed);
        s.save(dir / ("rep_" + std::to_string(r)));
        for (const auto& row : rows) {
          merged += std::to_string(row.attribute_count) + "," + (row.train_acc ? format_double(*row.train_acc) : "") + "," +
                    (row.test_acc ? format_double(*row.test_acc) : "") + "," + std::to_string(r) + "," +
                    std::to_string(rep_seed) + "\n";
        }
        if (!rows.empty() && rows.back().test_acc) {
          final_sum += *rows.back().test_acc;
          ++final_n;
        }
        std::cout << "rep " << r << " seed " << rep_seed << ": test_acc after " << attrs << " attributes = "
                  << (rows.empty() ? std::string("n/a") : fmt(rows.back().test_acc)) << "\n";
      }
      write_text_file(dir / "metrics.csv", merged);
      if (final_n > 0) std::cout << "mean test_acc: " << format_double(final_sum / final_n) << "\n";
      return 0;
    }

    if (*evaluate) {
      auto ds = load_dataset(features, split);
      const GroundTruthMatrix aligned = align_ground_truth(read_binary_table(matrix_path), *ds);
      const ClassAttributeMatrix matrix(aligned.values, aligned.attribute_names);
      const auto train = ds->training_indices();
      PcaResult pca = fit_pca(select_rows(ds->instances, train), std::min(d, ds->dim()));
      for (const auto& w : pca.warnings) std::cerr << "warning: " << w << "\n";
      const ExemplarSet ex = compute_exemplars(pca.space, *ds);
      std::vector<std::string> warnings;
      const ExemModel model = train_exem(matrix, ex, ExemHyper{}, &warnings);
      for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
      const Accuracy acc = evaluate_projected(model, project_rows(pca.space, ds->instances), *ds, matrix);
      std::cout << "attributes=" << matrix.n_attributes() << " d=" << pca.space.dim() << " train_acc=" << fmt(acc.train)
                << " test_acc=" << fmt(acc.test) << "\n";
      if (!out.empty()) {
        Json j{{"attributes", matrix.n_attributes()}, {"d", pca.space.dim()}, {"seed", seed},
               {"train_acc", nullptr}, {"test_acc", nullptr}};
        if (acc.train) j["train_acc"] = *acc.train;
        if (acc.test) j["test_acc"] = *acc.test;
        write_text_file(out, j.dump(2) + "\n");
      }
      return 0;
    }

    if (*replay) {
      auto ds = load_dataset(features, split);
      const Session s = Session::replay(ds, SessionLog::from_jsonl(read_text_file(log_path)));
      s.save(out);
      std::cout << "replayed " << s.matrix().n_attributes() << " attributes into " << out << "\n";
      return 0;
    }

    if (*serve) {
      if (bind.empty()) {
        const char* env = std::getenv("ZSNAV_BIND");
        bind = env && *env ? env : "127.0.0.1:8080";
      }
      const ServeOptions opts = parse_bind(bind);
      auto ds = load_dataset(features, split);
      SessionConfig cfg;
      cfg.d = d;
      cfg.seed = seed;
      cfg.features_path = features;
      cfg.split_path = split;
      std::cerr << "building session (PCA, exemplars, layout)...\n";
      auto session = std::make_unique<Session>(ds, cfg);
      std::optional<std::filesystem::path> dir;
      if (!out.empty()) dir = out;
      ApiService api(std::move(session), dir);
      api.flush();
      HttpServer http(api);
      const int port = http.start(opts);
      std::cerr << "listening on http://" << opts.host << ":" << port << "\n";
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(200));
      http.stop();
      api.wait_idle();
      api.flush();
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
