#include "commands.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>
#include <sstream>

#include "native/error.hpp"
#include "native/train_eval.hpp"

namespace native::cli {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw DataError(path.string() + ": write failed");
}

void write_json(const fs::path& path, const nlohmann::ordered_json& j) { write_text(path, j.dump(2) + "\n"); }

// A run directory holds checkpoint/; a checkpoint directory holds the
// manifest itself.
struct Located {
  fs::path checkpoint;
  fs::path run;
};

Located locate(const fs::path& model) {
  if (fs::exists(model / "checkpoint" / "manifest.json")) return {model / "checkpoint", model};
  if (fs::exists(model / "manifest.json")) return {model, model.parent_path()};
  throw DataError(model.string() + ": no checkpoint found");
}

// Dataset and feature store restricted to the checkpoint's modalities.
// DataError when the vocabularies or modalities disagree.
Dataset load_matching(const fs::path& dir, const ModelParams& model) {
  Dataset data = load_dataset(dir);
  if (data.kg.entity_count() != model.entity_count() || data.kg.relation_count() != model.relation_count()) {
    throw DataError("checkpoint has " + std::to_string(model.entity_count()) + " entities and " +
                    std::to_string(model.relation_count()) + " relations, dataset " + dir.string() + " has " +
                    std::to_string(data.kg.entity_count()) + " and " + std::to_string(data.kg.relation_count()));
  }
  std::vector<std::string> names;
  for (const ModalityInfo& m : model.modalities) names.push_back(m.name);
  try {
    data.features = data.features.select(names);
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint modalities do not match the dataset: ") + e.what());
  }
  check_compatible(model, data.features);
  return data;
}

struct SavedRun {
  fs::path data_dir;
  bool relation_guidance = true;
};

SavedRun saved_run(const Checkpoint& ck) {
  SavedRun s;
  const auto& j = ck.hyperparams;
  if (j.is_object()) {
    if (j.contains("run") && j["run"].contains("data_dir")) s.data_dir = j["run"]["data_dir"].get<std::string>();
    if (j.contains("redaf") && j["redaf"].contains("no_relation_guidance")) {
      s.relation_guidance = !j["redaf"]["no_relation_guidance"].get<bool>();
    }
  }
  return s;
}

const std::vector<Triple>& split_of(const KnowledgeGraph& kg, const std::string& name) {
  if (name == "test") return kg.test;
  if (name == "valid") return kg.valid;
  if (name == "train") return kg.train;
  throw ConfigError("split must be train, valid or test, got '" + name + "'");
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << v;
  return s.str();
}

}  // namespace

void cmd_train(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  if (cfg.data_dir.empty()) throw ConfigError("run.data_dir is not set");
  if (cfg.out_dir.empty()) throw ConfigError("no output directory given");
  Dataset data = load_dataset(cfg.data_dir);
  if (!cfg.modalities.empty()) {
    const auto available = data.features.modalities();
    data.features = data.features.select(resolve_modalities(cfg.modalities, available));
  }

  fs::create_directories(cfg.out_dir);
  write_text(cfg.out_dir / "config.toml", cfg.to_text());

  TrainOptions opt;
  opt.comat = cfg.comat_options();
  opt.seed = cfg.seed;
  opt.save_every = cfg.save_every;
  opt.out_dir = cfg.out_dir;
  opt.config = cfg.to_json();
  const std::size_t every = std::max<std::size_t>(1, cfg.hp.epochs / 10);
  opt.on_epoch = [&](const LossRow& row) {
    if (row.epoch % every != 0 && row.epoch != cfg.hp.epochs) return;
    log << "epoch " << row.epoch << " d_loss " << fixed(row.d_loss);
    if (row.g_loss) log << " g_loss " << fixed(*row.g_loss);
    log << '\n';
  };
  const TrainResult result = train(data.kg, data.features, cfg.hp, opt);

  const Scorer scorer(result.discriminator.model, data.features, opt.comat.relation_guidance);
  const auto groups = group_split(data.kg, data.features);
  EvalOptions eval;
  eval.groups = &groups;
  eval.threads = cfg.threads;
  MetricsReport report = evaluate(data.kg.test, scorer, data.kg.filter, eval);
  report.losses = result.losses;
  write_json(cfg.out_dir / "metrics.json", report.to_json());
  log << "test mrr " << fixed(report.mrr) << " hits@1 " << fixed(report.hits.at(1)) << " hits@10 "
      << fixed(report.hits.at(10)) << " (" << report.n_queries << " queries, " << fixed(report.seconds, 2)
      << " s)\n";
}

void cmd_eval(const EvalArgs& args, std::ostream& log) {
  const Located at = locate(args.model);
  const Checkpoint ck = load_checkpoint(at.checkpoint);
  const SavedRun saved = saved_run(ck);
  const fs::path data_dir = args.data.empty() ? saved.data_dir : args.data;
  if (data_dir.empty()) throw ConfigError("no dataset given and the checkpoint does not name one");
  if (args.threads < 1) throw ConfigError("threads must be at least 1");
  const Dataset data = load_matching(data_dir, ck.model);
  const std::vector<Triple>& split = split_of(data.kg, args.split);

  const Scorer scorer(ck.model, data.features, saved.relation_guidance);
  std::vector<GroupLabel> labels;
  EvalOptions opt;
  opt.threads = args.threads;
  if (args.groups) {
    if (args.split != "test") throw ConfigError("--groups applies to the test split only");
    labels = group_split(data.kg, data.features);
    opt.groups = &labels;
  }
  const MetricsReport report = evaluate(split, scorer, data.kg.filter, opt);
  const fs::path out = args.out.empty() ? at.run : args.out;
  fs::create_directories(out);
  write_json(out / "metrics.json", report.to_json());
  log << args.split << " mrr " << fixed(report.mrr) << " hits@1 " << fixed(report.hits.at(1)) << " hits@3 "
      << fixed(report.hits.at(3)) << " hits@10 " << fixed(report.hits.at(10)) << " (" << report.n_queries
      << " queries)\n";
  for (const auto& [name, g] : report.groups) {
    log << "  " << name << " mrr " << fixed(g.mrr) << " (" << g.n_queries << " queries)\n";
  }
}

void cmd_perturb(const PerturbArgs& args, std::ostream& log) {
  ImbalanceSpec spec;
  spec.eta = args.eta;
  spec.level = parse_imbalance_level(args.level);
  spec.seed = args.seed;
  if (!(spec.eta >= 0.0 && spec.eta <= 1.0)) throw ConfigError("eta must lie in [0, 1]");
  if (args.out.empty()) throw ConfigError("no output directory given");
  const Dataset data = load_dataset(args.data);
  const PerturbResult result = perturb(data.features, data.kg, spec);
  write_perturbed_dataset(args.data, args.out, data, result, spec);
  log << "dropped " << result.dropped_slots.size() << " feature entries";
  if (spec.level == ImbalanceLevel::entity) log << " across " << result.dropped_entities.size() << " entities";
  log << '\n';
}

void cmd_report(const ReportArgs& args, std::ostream& log) {
  const Located at = locate(args.model);
  const Checkpoint ck = load_checkpoint(at.checkpoint);
  const SavedRun saved = saved_run(ck);
  const fs::path data_dir = args.data.empty() ? saved.data_dir : args.data;
  if (data_dir.empty()) throw ConfigError("no dataset given and the checkpoint does not name one");
  const Dataset data = load_matching(data_dir, ck.model);

  std::vector<Triple> sample = data.kg.train;
  if (args.sample > 0 && sample.size() > args.sample) {
    Rng rng = Rng::stream(args.seed, "report");
    std::vector<std::size_t> idx = rng.sample(sample.size(), args.sample);
    std::sort(idx.begin(), idx.end());
    std::vector<Triple> picked;
    for (std::size_t i : idx) picked.push_back(sample[i]);
    sample = std::move(picked);
  }

  const fs::path out = args.out.empty() ? at.run : args.out;
  fs::create_directories(out);
  write_temperatures_csv(out / "temperatures.csv", ck.model, data.kg.relations);
  const WeightSummary summary = modality_weight_summary(ck.model, data.features, sample, saved.relation_guidance);
  write_weight_summary_csv(out / "modality_weights.csv", summary, data.kg.relations);
  log << "wrote temperatures.csv (" << ck.model.relation_count() << " relations) and modality_weights.csv ("
      << summary.relations.size() << " relations, " << sample.size() << " triples)\n";
}

void cmd_gen_synth(const SynthArgs& args, std::ostream& log) {
  SynthSpec spec = args.spec;
  if (!args.modalities.empty()) {
    spec.modalities.clear();
    std::stringstream in(args.modalities);
    std::string item;
    while (std::getline(in, item, ',')) {
      const std::size_t colon = item.find(':');
      std::size_t dim = 0;
      try {
        if (colon == std::string::npos) throw std::invalid_argument("missing dim");
        std::size_t used = 0;
        dim = std::stoul(item.substr(colon + 1), &used);
        if (used != item.size() - colon - 1) throw std::invalid_argument("trailing text");
      } catch (const std::exception&) {
        throw ConfigError("modalities: expected name:dim, got '" + item + "'");
      }
      spec.modalities.push_back({item.substr(0, colon), dim});
    }
  }
  if (args.out.empty()) throw ConfigError("no output directory given");
  spec.validate();
  gen_synth(spec, args.out);
  const Dataset data = load_dataset(args.out);
  log << "wrote " << data.kg.entity_count() << " entities, " << data.kg.relation_count() << " relations, "
      << data.kg.train.size() << "/" << data.kg.valid.size() << "/" << data.kg.test.size()
      << " train/valid/test triples to " << args.out.string() << '\n';
}

}  // namespace native::cli
