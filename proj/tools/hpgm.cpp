#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "hpgm/dataset.hpp"
#include "hpgm/eval.hpp"
#include "hpgm/layout.hpp"
#include "hpgm/server.hpp"
#include "hpgm/service.hpp"
#include "hpgm/texture.hpp"

using namespace hpgm;
namespace fs = std::filesystem;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_file(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw UsageError("cannot read " + p.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& s) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  os << s;
}

text::Vocabularies vocab_for(const fs::path& checkpoints) {
  return fs::exists(checkpoints / "vocab.txt") ? text::Vocabularies::load(checkpoints / "vocab.txt")
                                              : text::Vocabularies::defaults();
}

std::pair<std::vector<text::HouseSpec>, std::vector<std::vector<BBox>>> houses(const data::Corpus& c,
                                                                               const std::vector<int>& idx) {
  std::vector<text::HouseSpec> specs;
  std::vector<std::vector<BBox>> boxes;
  for (int i : idx) {
    specs.push_back(c.houses.at(static_cast<std::size_t>(i)).spec);
    boxes.push_back(c.houses.at(static_cast<std::size_t>(i)).gt_boxes);
  }
  return {specs, boxes};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hpgm: text to 3D house pipeline"};
  app.require_subcommand(1);

  auto* gen_data = app.add_subcommand("gen-data", "write a synthetic corpus");
  data::CorpusConfig corpus_cfg;
  fs::path data_out;
  gen_data->add_option("--out", data_out, "corpus directory")->required();
  gen_data->add_option("--train", corpus_cfg.n_train, "training houses");
  gen_data->add_option("--test", corpus_cfg.n_test, "test houses");
  gen_data->add_option("--textures", corpus_cfg.textures, "texture images");
  gen_data->add_option("--texture-size", corpus_cfg.texture_size, "texture side in pixels");
  gen_data->add_option("--seed", corpus_cfg.seed, "corpus seed");

  auto* train_layout = app.add_subcommand("train-layout", "train the layout network");
  fs::path data_dir, ckpt_dir;
  layout::GcLpnConfig layout_cfg;
  bool no_gcn = false;
  train_layout->add_option("--data", data_dir, "corpus directory")->required();
  train_layout->add_option("--checkpoints", ckpt_dir, "checkpoint directory")->required();
  train_layout->add_option("--epochs", layout_cfg.epochs, "training epochs");
  train_layout->add_option("--seed", layout_cfg.seed, "initialisation and shuffling seed");
  train_layout->add_flag("--no-gcn", no_gcn, "train the perceptron-only ablation");

  auto* train_texture = app.add_subcommand("train-texture", "train the texture GAN");
  tex::LctGanConfig tex_cfg;
  train_texture->add_option("--data", data_dir, "corpus directory")->required();
  train_texture->add_option("--checkpoints", ckpt_dir, "checkpoint directory")->required();
  train_texture->add_option("--iterations", tex_cfg.iterations, "training iterations");
  train_texture->add_option("--base-width", tex_cfg.base_width, "generator base width F");
  train_texture->add_option("--seed", tex_cfg.seed, "seed");

  auto* generate = app.add_subcommand("generate", "text to plan, textures and mesh");
  std::string text_arg;
  fs::path text_file, out_dir;
  svc::GenerateOptions gen_opt;
  auto* text_opt = generate->add_option("--text", text_arg, "description");
  generate->add_option("--text-file", text_file, "file holding the description")->excludes(text_opt);
  generate->add_option("--checkpoints", ckpt_dir, "checkpoint directory")->envname("HPGM_CHECKPOINTS")->required();
  generate->add_option("--out", out_dir, "output directory")->required();
  generate->add_option("--seed", gen_opt.seed, "generation seed");
  generate->add_option("--texture-cells", gen_opt.texture_cells, "noise grid side (32 px per cell)");

  auto* evaluate = app.add_subcommand("evaluate", "score the models on a corpus split");
  std::string split = "test";
  fs::path report_path;
  int probe_epochs = 40;
  evaluate->add_option("--data", data_dir, "corpus directory")->required();
  evaluate->add_option("--checkpoints", ckpt_dir, "checkpoint directory")->envname("HPGM_CHECKPOINTS")->required();
  evaluate->add_option("--split", split, "train or test")->check(CLI::IsMember({"train", "test"}));
  evaluate->add_option("--out", report_path, "report JSON path");
  evaluate->add_option("--probe-epochs", probe_epochs, "probe classifier epochs");

  auto* serve = app.add_subcommand("serve", "start the HTTP API");
  svc::ServerOptions server_opt;
  serve->add_option("--checkpoints", ckpt_dir, "checkpoint directory")->envname("HPGM_CHECKPOINTS")->required();
  serve->add_option("--port", server_opt.port, "port")->envname("HPGM_PORT");
  serve->add_option("--host", server_opt.host, "bind address");
  serve->add_option("--cors-origin", server_opt.cors_origin, "allowed origin");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*gen_data) {
      data::write_corpus(data_out, corpus_cfg, text::Vocabularies::defaults());
      std::cout << "wrote " << corpus_cfg.n_train + corpus_cfg.n_test << " houses and " << corpus_cfg.textures
                << " textures to " << data_out << "\n";
    } else if (*train_layout) {
      const auto vocab = vocab_for(ckpt_dir);
      const auto corpus = data::load_corpus(data_dir, vocab);
      layout_cfg.gcn_on = !no_gcn;
      const auto [specs, boxes] = houses(corpus, corpus.split.train);
      const auto result = layout::train_gclpn(layout::training_set(specs, boxes, vocab, layout_cfg), layout_cfg);
      layout::LayoutModel model{layout_cfg, result.params};
      model.save(ckpt_dir / "layout");
      std::ostringstream csv;
      csv << "epoch,loss\n";
      for (std::size_t e = 0; e < result.loss_trace.size(); ++e) csv << e << ',' << result.loss_trace[e] << '\n';
      write_file(ckpt_dir / "layout" / "loss.csv", csv.str());
      std::cout << "final loss " << result.loss_trace.back() << "\n";
    } else if (*train_texture) {
      const auto vocab = vocab_for(ckpt_dir);
      std::vector<tex::TextureSample> samples;
      for (const auto& t : data::load_texture_corpus(data_dir / "textures", vocab))
        samples.push_back({tex::image_to_tensor(t.image), t.material, t.colour});
      std::ostringstream csv;
      csv << "iteration,loss_d,loss_g,loss_material,loss_colour\n";
      const auto out = tex::train_lctgan(samples, tex_cfg, [&](int it, const tex::TrainStep& s) {
        csv << it << ',' << s.loss_d << ',' << s.loss_g << ',' << s.loss_material << ',' << s.loss_colour << '\n';
      });
      out.model.save(ckpt_dir / "texture");
      write_file(ckpt_dir / "texture" / "loss.csv", csv.str());
      std::cout << "trained " << tex_cfg.iterations << " iterations\n";
    } else if (*generate) {
      if (text_arg.empty() && text_file.empty()) throw UsageError("generate needs --text or --text-file");
      const std::string text = text_file.empty() ? text_arg : read_file(text_file);
      const auto models = svc::Models::load(ckpt_dir);
      const auto result = svc::generate(models, text, gen_opt);
      svc::write_result(result, models.vocab, out_dir);
      std::cout << "wrote " << result.plan.rooms.size() << " rooms and " << result.textures.size() << " textures to "
                << out_dir << "\n";
      for (const auto& n : result.notes) std::cout << "note: " << n << "\n";
    } else if (*evaluate) {
      const auto models = svc::Models::load(ckpt_dir);
      const auto corpus = data::load_corpus(data_dir, models.vocab);
      const auto& idx = split == "train" ? corpus.split.train : corpus.split.test;
      std::vector<std::vector<BBox>> pred, truth;
      for (int i : idx) {
        const auto& h = corpus.houses.at(static_cast<std::size_t>(i));
        pred.push_back(models.layout.predict(h.spec, models.vocab));
        truth.push_back(h.gt_boxes);
      }
      eval::EvalReport report;
      report.n_samples = idx.size();
      report.mean_iou = eval::mean_iou(pred, truth);
      std::vector<double> type_sum(models.vocab.room_types.size(), 0.0);
      std::vector<int> type_n(models.vocab.room_types.size(), 0);
      for (std::size_t k = 0; k < idx.size(); ++k) {
        const auto& rooms = corpus.houses.at(static_cast<std::size_t>(idx[k])).spec.rooms;
        for (std::size_t r = 0; r < rooms.size(); ++r) {
          type_sum[static_cast<std::size_t>(rooms[r].room_type)] += eval::iou(pred[k][r], truth[k][r]);
          ++type_n[static_cast<std::size_t>(rooms[r].room_type)];
        }
      }
      for (std::size_t t = 0; t < type_sum.size(); ++t)
        report.per_room_iou.push_back(type_n[t] ? type_sum[t] / type_n[t] : 0.0);
      std::vector<std::pair<int, int>> conditions(models.texture.seen_pairs.begin(), models.texture.seen_pairs.end());
      double diversity = 0;
      for (const auto& [m, c] : conditions)
        diversity += eval::diversity_score(models.texture, text::make_condition(models.vocab, m, c), 4, 1);
      report.ms_ssim = conditions.empty() ? 0 : diversity / static_cast<double>(conditions.size());
      eval::ProbeConfig pc;
      pc.epochs = probe_epochs;
      const auto probe = eval::train_probe(eval::probe_corpus(4, 32, 11), eval::probe_corpus(1, 32, 12), pc);
      const auto align = eval::alignment_accuracy(models.texture, conditions, probe, 3);
      report.material_acc = align.material_acc;
      report.colour_acc = align.colour_acc;
      report.probe_material_acc = probe.test_material_acc;
      report.probe_colour_acc = probe.test_colour_acc;
      const std::string json = report.to_json().dump(2) + "\n";
      if (!report_path.empty()) write_file(report_path, json);
      std::cout << report.table();
    } else if (*serve) {
      svc::ApiServer server(server_opt);
      const int port = server.bind();
      std::cerr << "listening on " << server_opt.host << ":" << port << "\n";
      std::thread loader([&] {
        while (!server.running()) std::this_thread::sleep_for(std::chrono::milliseconds(10));
        try {
          server.set_models(std::make_shared<const svc::Models>(svc::Models::load(ckpt_dir)));
          std::cerr << "models loaded\n";
        } catch (const std::exception& e) {
          std::cerr << "error: " << e.what() << "\n";
          server.stop();
        }
      });
      server.serve();
      loader.join();
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n" << app.help();
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
