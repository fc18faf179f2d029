// native: train, evaluate and inspect multi-modal KG completion models.
//
// Exit codes: 0 ok, 2 configuration error, 3 data or checkpoint error,
// 4 numeric failure, 1 anything else. Failures print one JSON line on
// stderr: {"error": "<kind>", "exit": <code>, "message": "..."}.

#include <CLI11.hpp>
#include <iostream>
#include <json.hpp>

#include "commands.hpp"
#include "native/error.hpp"

namespace {

int fail(const char* kind, int code, const std::string& message) {
  nlohmann::ordered_json j{{"error", kind}, {"exit", code}, {"message", message}};
  std::cerr << j.dump() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace native::cli;
  CLI::App app{"Multi-modal knowledge graph completion with relation-guided fusion and modality adversarial training"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "Train a model, then evaluate it on the test split");
  std::string config_file, preset = "full", gp_sign, modalities;
  std::vector<std::string> sets;
  std::string data_dir, out_dir;
  std::uint64_t seed = 0;
  std::size_t save_every = 0, threads = 1;
  bool no_comat = false, no_relation_guidance = false, no_gp = false, vanilla_gan = false, mlp = false;
  train->add_option("--config", config_file, "Config file ([run] [redaf] [train] [comat] sections)");
  train->add_option("--preset", preset, "Starting values: full or desk")->capture_default_str();
  train->add_option("--set", sets, "Override one key, e.g. --set train.epochs=50");
  auto* t_data = train->add_option("--data", data_dir, "Dataset directory");
  train->add_option("--out", out_dir, "Output directory")->required();
  auto* t_seed = train->add_option("--seed", seed, "Run seed");
  auto* t_mod = train->add_option("--modalities", modalities, "Modalities to keep, e.g. S,T");
  auto* t_save = train->add_option("--save-every", save_every, "Checkpoint every N epochs");
  auto* t_threads = train->add_option("--threads", threads, "Evaluation threads");
  auto* t_sign = train->add_option("--gp-sign", gp_sign, "paper or standard");
  train->add_flag("--no-comat", no_comat, "Disable adversarial training");
  train->add_flag("--no-relation-guidance", no_relation_guidance, "Fix every fusion temperature at 1");
  train->add_flag("--no-gp", no_gp, "Drop the gradient penalty");
  train->add_flag("--vanilla-gan", vanilla_gan, "Cross-entropy GAN losses instead of Wasserstein");
  train->add_flag("--mlp-discriminator", mlp, "Separate MLP critic instead of the score function");
  for (CLI::Option* o : {t_data, t_seed, t_mod, t_save, t_threads, t_sign}) {
    o->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  }

  // eval
  auto* eval = app.add_subcommand("eval", "Filtered link prediction metrics of a checkpoint");
  EvalArgs ea;
  eval->add_option("--model", ea.model, "Run or checkpoint directory")->required();
  eval->add_option("--data", ea.data, "Dataset directory (default: the run's)");
  eval->add_option("--out", ea.out, "Where metrics.json goes (default: the run directory)");
  eval->add_option("--split", ea.split, "train, valid or test")->capture_default_str();
  eval->add_flag("--groups", ea.groups, "Add per-group reports by modality completeness");
  eval->add_option("--threads", ea.threads, "Worker threads")->capture_default_str();

  // perturb
  auto* pert = app.add_subcommand("perturb", "Copy a dataset with a fraction of its features removed");
  PerturbArgs pa;
  pert->add_option("--data", pa.data, "Source dataset")->required();
  pert->add_option("--out", pa.out, "Destination directory")->required();
  pert->add_option("--eta", pa.eta, "Fraction to drop, in [0, 1]")->required();
  pert->add_option("--level", pa.level, "entity or modality")->capture_default_str();
  pert->add_option("--seed", pa.seed, "Seed")->capture_default_str();

  // report
  auto* rep = app.add_subcommand("report", "Relation temperatures and mean modality weights");
  ReportArgs ra;
  rep->add_option("--model", ra.model, "Run or checkpoint directory")->required();
  rep->add_option("--data", ra.data, "Dataset directory (default: the run's)");
  rep->add_option("--out", ra.out, "Output directory (default: the run directory)");
  rep->add_option("--sample", ra.sample, "Training triples in the weight summary")->capture_default_str();
  rep->add_option("--seed", ra.seed, "Sampling seed")->capture_default_str();

  // gen-synth
  auto* gen = app.add_subcommand("gen-synth", "Write a synthetic multi-modal dataset");
  SynthArgs sa;
  gen->add_option("--out", sa.out, "Destination directory")->required();
  gen->add_option("--entities", sa.spec.entities)->capture_default_str();
  gen->add_option("--relations", sa.spec.relations)->capture_default_str();
  gen->add_option("--clusters", sa.spec.clusters)->capture_default_str();
  gen->add_option("--modalities", sa.modalities, "name:dim,... (default image:16,text:16)");
  gen->add_option("--density", sa.spec.density)->capture_default_str();
  gen->add_option("--noise", sa.spec.noise)->capture_default_str();
  gen->add_option("--seed", sa.spec.seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return fail("config", 2, e.what());
  }

  try {
    if (train->parsed()) {
      RunConfig cfg = RunConfig::preset(preset);
      if (!config_file.empty()) cfg.apply_file(config_file);
      for (const std::string& s : sets) {
        const std::size_t eq = s.find('=');
        if (eq == std::string::npos) throw native::ConfigError("--set expects key=value, got '" + s + "'");
        cfg.set(s.substr(0, eq), s.substr(eq + 1));
      }
      if (t_data->count()) cfg.data_dir = data_dir;
      if (t_seed->count()) cfg.seed = seed;
      if (t_mod->count()) cfg.set("run.modalities", modalities);
      if (t_save->count()) cfg.save_every = save_every;
      if (t_threads->count()) cfg.threads = threads;
      if (t_sign->count()) cfg.gp_sign = native::parse_gp_sign(gp_sign);
      cfg.no_comat |= no_comat;
      cfg.no_relation_guidance |= no_relation_guidance;
      cfg.no_gp |= no_gp;
      cfg.vanilla_gan |= vanilla_gan;
      cfg.mlp_discriminator |= mlp;
      cfg.out_dir = out_dir;
      cmd_train(cfg, std::cout);
    } else if (eval->parsed()) {
      cmd_eval(ea, std::cout);
    } else if (pert->parsed()) {
      cmd_perturb(pa, std::cout);
    } else if (rep->parsed()) {
      cmd_report(ra, std::cout);
    } else if (gen->parsed()) {
      cmd_gen_synth(sa, std::cout);
    }
  } catch (const native::ConfigError& e) {
    return fail("config", 2, e.what());
  } catch (const native::DataError& e) {
    return fail("data", 3, e.what());
  } catch (const native::NumericError& e) {
    return fail("numeric", 4, e.what());
  } catch (const std::exception& e) {
    return fail("internal", 1, e.what());
  }
  return 0;
}
