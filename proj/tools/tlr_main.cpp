// tlr: learn temporal-logic scoring rules from demonstrations and apply them
// to rank candidate trajectories.

#include "tlr/errors.hpp"
#include "tlr/extraction.hpp"
#include "tlr/logic_network.hpp"
#include "tlr/predicates.hpp"
#include "tlr/scenario.hpp"
#include "tlr/scoring.hpp"
#include "tlr/semantics.hpp"
#include "tlr/trace.hpp"
#include "tlr/training.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>

using nlohmann::json;
using namespace tlr;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitBadInput = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitInternal = 4;

RuleSet resolve_teacher(const std::string& spec, const PredicateRegistry& reg) {
  if (spec == "builtin:comfort") return teacher_comfort(reg);
  if (spec == "builtin:city3") return teacher_city3(reg);
  return load_ruleset(spec, reg);
}

std::vector<ScenarioSpec> specs_for_kinds(const std::string& kinds, double rate_hz,
                                          int episode_steps) {
  std::vector<ScenarioSpec> specs;
  auto add = [&](ScenarioKind k) {
    ScenarioSpec s;
    s.kind = k;
    s.rate_hz = rate_hz;
    s.episode_steps = episode_steps;
    specs.push_back(s);
  };
  if (kinds == "all") {
    for (auto k : all_scenario_kinds()) add(k);
  } else {
    std::stringstream ss(kinds);
    std::string item;
    while (std::getline(ss, item, ',')) add(scenario_kind_from_string(item));
  }
  return specs;
}

void write_metrics_file(const TrainReport& report, const std::string& path) {
  std::ofstream out(path);
  for (std::size_t e = 0; e < report.train_obj.size(); ++e) {
    json j{{"epoch", e + 1}, {"train_obj", report.train_obj[e]}, {"val_obj", report.val_obj[e]}};
    out << j.dump() << "\n";
  }
}

json run_metrics_json(const RunMetrics& m) {
  double mean_ms = m.cycle_ms.empty()
                       ? 0.0
                       : std::accumulate(m.cycle_ms.begin(), m.cycle_ms.end(), 0.0) /
                             static_cast<double>(m.cycle_ms.size());
  double max_ms = m.cycle_ms.empty() ? 0.0 : *std::max_element(m.cycle_ms.begin(), m.cycle_ms.end());
  return json{{"collision", m.collision},
              {"drivable_exit", m.drivable_exit},
              {"comfort_violations", m.comfort_violations},
              {"progress_m", m.progress_m},
              {"executed_score", m.executed_score},
              {"cycles", m.cycles},
              {"proposer_errors", m.proposer_errors},
              {"cycle_ms_mean", mean_ms},
              {"cycle_ms_max", max_ms}};
}

struct TrainFlags {
  std::string data;
  std::string out = "model.ckpt";
  int depth = 2;
  int ensemble = 10;
  double lr = 1e-4, alpha = 1e-5, beta = 1e-3, wmax = 40.0, kappa = 10.0;
  int batch = 32, patience = 10, max_epochs = 400;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  std::vector<std::string> preds; // empty = full registry
};

TrainResult run_training(const TrainFlags& f, const PredicateRegistry& reg, const Dataset& data) {
  TrainConfig cfg;
  cfg.lr = f.lr;
  cfg.alpha = f.alpha;
  cfg.beta = f.beta;
  cfg.w_max = f.wmax;
  cfg.batch_size = f.batch;
  cfg.patience = f.patience;
  cfg.max_epochs = f.max_epochs;
  cfg.kappa = f.kappa;
  cfg.seed = f.seed;
  cfg.threads = f.threads;
  auto ids = f.preds.empty() ? reg.ids() : f.preds;
  auto ens = build_ensemble(ids, f.depth, static_cast<std::size_t>(f.ensemble), f.seed);
  return train(data, reg, std::move(ens), cfg);
}

void save_train_result(const TrainResult& res, const PredicateRegistry& reg,
                       const std::string& out_path, double kappa) {
  Checkpoint ck;
  ck.structure = res.structure;
  ck.theta = res.theta;
  ck.registry_hash = reg.hash();
  ck.kappa = kappa;
  save_checkpoint(ck, out_path);
  write_metrics_file(res.report, out_path + ".metrics.jsonl");
}

RuleSet extract_rules(const Checkpoint& ck, const PredicateRegistry& reg, const std::string& provenance) {
  auto conc = concretize(ck.structure);
  FormulaPtr simple = simplify(conc.formula);
  RuleSet rs = to_condition_action_pairs(simple, reg);
  rs.theta = ck.theta.to_map();
  rs.provenance = provenance;
  return rs;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"temporal-logic rule learning and trajectory scoring"};
  app.require_subcommand(1);
  app.fallthrough(); // global flags may appear after the subcommand

  std::uint64_t g_seed = 0;
  unsigned g_threads = 0;
  std::string g_log = "info";
  app.add_option("--seed", g_seed, "global seed");
  app.add_option("--threads", g_threads, "worker threads (0 = all cores)");
  app.add_option("--log-level", g_log, "log level (quiet|info|debug)");

  PredicateRegistry reg = builtin_registry();

  // ingest ------------------------------------------------------------------
  auto* ingest = app.add_subcommand("ingest", "parse a trace file and validate it");
  std::string ingest_in;
  bool ingest_validate = false;
  ingest->add_option("--in", ingest_in, "trace file (jsonl)")->required();
  ingest->add_flag("--validate", ingest_validate, "re-run invariant checks per trace");

  // predicates ----------------------------------------------------------------
  auto* predicates_cmd = app.add_subcommand("predicates", "predicate catalog commands");
  auto* pred_list = predicates_cmd->add_subcommand("list", "print the registry table");

  // gen-demos -----------------------------------------------------------------
  auto* gen = app.add_subcommand("gen-demos", "generate teacher-compliant demonstrations");
  std::string gen_teacher = "builtin:city3", gen_kinds = "all", gen_out = "demos.jsonl";
  std::size_t gen_n = 2000;
  double gen_rate = 20.0;
  int gen_steps = 0; // 0 = one horizon
  gen->add_option("--teacher", gen_teacher, "rule file or builtin:{comfort,city3}");
  gen->add_option("--kinds", gen_kinds, "comma list of scenario kinds or 'all'");
  gen->add_option("--n", gen_n, "number of demonstrations");
  gen->add_option("--out", gen_out, "output trace file");
  gen->add_option("--rate", gen_rate, "sample rate (20, 10 or 5 Hz)");
  gen->add_option("--episode-steps", gen_steps, "frames per demonstration (0 = horizon length)");

  // train ----------------------------------------------------------------------
  auto* train_cmd = app.add_subcommand("train", "fit the scoring structure to demonstrations");
  TrainFlags tf;
  train_cmd->add_option("--data", tf.data, "demonstration trace file")->required();
  train_cmd->add_option("--depth", tf.depth, "temporal layer count");
  train_cmd->add_option("--ensemble", tf.ensemble, "ensemble size");
  train_cmd->add_option("--lr", tf.lr, "Adam learning rate");
  train_cmd->add_option("--alpha", tf.alpha, "parameter tightening rate");
  train_cmd->add_option("--beta", tf.beta, "aggregation AND bias rate");
  train_cmd->add_option("--wmax", tf.wmax, "AND bias cap");
  train_cmd->add_option("--batch", tf.batch, "batch size");
  train_cmd->add_option("--patience", tf.patience, "early-stopping patience (epochs)");
  train_cmd->add_option("--max-epochs", tf.max_epochs, "epoch cap");
  train_cmd->add_option("--kappa", tf.kappa, "soft semantics temperature");
  train_cmd->add_option("--preds", tf.preds, "predicate subset (default: full registry)");
  train_cmd->add_option("--out", tf.out, "checkpoint path");

  // extract ----------------------------------------------------------------------
  auto* extract_cmd = app.add_subcommand("extract", "concretize and simplify a checkpoint");
  std::string ex_ckpt, ex_out = "rules.tlr";
  extract_cmd->add_option("--ckpt", ex_ckpt, "checkpoint path")->required();
  extract_cmd->add_option("--out", ex_out, "rule file path");

  // score ---------------------------------------------------------------------
  auto* score_cmd = app.add_subcommand("score", "score candidate plans against a scene");
  std::string sc_rules, sc_scene, sc_cands, sc_report = "report.json";
  score_cmd->add_option("--rules", sc_rules, "rule file")->required();
  score_cmd->add_option("--scene", sc_scene, "trace file; frame 0 of trace 0 is the scene")->required();
  score_cmd->add_option("--candidates", sc_cands, "jsonl of {id, points} candidate plans")->required();
  score_cmd->add_option("--report", sc_report, "output report path");

  // simulate ---------------------------------------------------------------------
  auto* sim_cmd = app.add_subcommand("simulate", "closed-loop run with a rule scorer");
  std::string sim_kind = "following", sim_rules, sim_proposer = "at", sim_metrics = "metrics.jsonl";
  std::size_t sim_n = 15;
  int sim_steps = 100;
  double sim_rate = 20.0;
  sim_cmd->add_option("--kind", sim_kind, "scenario kind");
  sim_cmd->add_option("--rules", sim_rules, "rule file or builtin:{comfort,city3}")->required();
  sim_cmd->add_option("--proposer", sim_proposer, "proposer (at)");
  sim_cmd->add_option("--n", sim_n, "candidates per cycle");
  sim_cmd->add_option("--steps", sim_steps, "cycles to run");
  sim_cmd->add_option("--rate", sim_rate, "sample rate Hz");
  sim_cmd->add_option("--metrics", sim_metrics, "metrics output (jsonl)");

  // ablate ---------------------------------------------------------------------
  auto* ablate_cmd = app.add_subcommand("ablate", "regularization grid over seeds");
  std::string ab_data, ab_out = "ablation.json";
  std::vector<double> ab_alphas{0.0, 1e-5};
  std::vector<double> ab_betas{1e-3};
  int ab_seeds = 10;
  TrainFlags ab_tf;
  ablate_cmd->add_option("--data", ab_data, "demonstration trace file")->required();
  ablate_cmd->add_option("--alphas", ab_alphas, "alpha grid");
  ablate_cmd->add_option("--betas", ab_betas, "beta grid");
  ablate_cmd->add_option("--seeds", ab_seeds, "seeds per cell");
  ablate_cmd->add_option("--depth", ab_tf.depth, "temporal layers");
  ablate_cmd->add_option("--ensemble", ab_tf.ensemble, "ensemble size");
  ablate_cmd->add_option("--max-epochs", ab_tf.max_epochs, "epoch cap");
  ablate_cmd->add_option("--preds", ab_tf.preds, "predicate subset");
  ablate_cmd->add_option("--out", ab_out, "output table path");

  // e2e ------------------------------------------------------------------------
  auto* e2e_cmd = app.add_subcommand("e2e", "demos -> train -> extract -> simulate");
  std::string e2e_out = "e2e";
  std::size_t e2e_n = 800;
  e2e_cmd->add_option("--out", e2e_out, "output directory");
  e2e_cmd->add_option("--n", e2e_n, "demonstration count");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) {
      Dataset ds = load_dataset(ingest_in);
      std::size_t frames = 0;
      for (const auto& t : ds.traces) frames += t.frames.size();
      std::cout << "traces: " << ds.traces.size() << "\nframes: " << frames << "\n";
      if (ingest_validate) {
        std::size_t bad = 0;
        for (std::size_t i = 0; i < ds.traces.size(); ++i) {
          auto v = validate_trace(ds.traces[i]);
          for (const auto& violation : v) {
            std::cout << "trace " << i << ": " << to_string(violation) << "\n";
            ++bad;
          }
        }
        std::cout << (bad == 0 ? "all traces valid\n" : "violations: " + std::to_string(bad) + "\n");
        if (bad) return kExitBadInput;
      }
      return kExitOk;
    }

    if (*pred_list) {
      std::cout << std::left << std::setw(22) << "id" << std::setw(11) << "kind"
                << std::setw(34) << "theta (default, bounds, unit)" << "doc\n";
      for (const auto& id : reg.ids()) {
        const Predicate& p = reg.at(id);
        std::string params;
        for (const auto& ps : p.params) {
          if (!params.empty()) params += "; ";
          std::ostringstream os;
          os << ps.name << "=" << ps.def << " [" << ps.lo << "," << ps.hi << "] " << ps.unit;
          params += os.str();
        }
        std::cout << std::left << std::setw(22) << id << std::setw(11)
                  << (p.kind == PredicateKind::Condition ? "condition" : "action") << std::setw(34)
                  << params << p.doc << "\n";
      }
      return kExitOk;
    }

    if (*gen) {
      RuleSet teacher = resolve_teacher(gen_teacher, reg);
      int steps = gen_steps > 0 ? gen_steps : static_cast<int>(gen_rate * 4.0);
      auto specs = specs_for_kinds(gen_kinds, gen_rate, steps);
      DemoStats stats;
      DemoConfig cfg;
      cfg.threads = g_threads;
      Dataset ds = generate_demonstrations(teacher, reg, specs, gen_n, g_seed, cfg, &stats);
      save_dataset(ds, gen_out);
      std::cout << "demos: " << ds.traces.size() << "\nacceptance: " << stats.acceptance_rate()
                << "\n";
      return kExitOk;
    }

    if (*train_cmd) {
      tf.seed = g_seed;
      tf.threads = g_threads;
      Dataset data = load_dataset(tf.data);
      TrainResult res = run_training(tf, reg, data);
      save_train_result(res, reg, tf.out, tf.kappa);
      std::cout << "epochs: " << res.report.epochs_run << "\nbest_epoch: " << res.report.best_epoch
                << "\nbest_val: " << res.report.val_obj[static_cast<std::size_t>(res.report.best_epoch - 1)]
                << "\ncheckpoint: " << tf.out << "\n";
      return kExitOk;
    }

    if (*extract_cmd) {
      Checkpoint ck = load_checkpoint(ex_ckpt);
      if (ck.registry_hash != reg.hash())
        throw ConfigError("checkpoint was trained against a different predicate catalog");
      RuleSet rs = extract_rules(ck, reg, "ckpt:" + ex_ckpt);
      save_ruleset(rs, ex_out);
      std::cout << render_rules_text(rs);
      std::cout << (is_trivial(rs, reg) ? "warning: rule set is trivial\n" : "");
      return kExitOk;
    }

    if (*score_cmd) {
      RuleSet rules = resolve_teacher(sc_rules, reg);
      Dataset scene = load_dataset(sc_scene);
      if (scene.traces.empty() || scene.traces[0].frames.empty())
        throw ParseError("scene file has no frames");
      CandidateSet cs;
      cs.env = scene.traces[0].frames[0];
      cs.rate_hz = scene.traces[0].rate_hz;
      std::ifstream cf(sc_cands);
      if (!cf) throw ParseError("cannot open '" + sc_cands + "'");
      std::string line;
      std::vector<std::string> cand_ids;
      long lineno = 0;
      while (std::getline(cf, line)) {
        ++lineno;
        if (line.empty()) continue;
        json cj = json::parse(line, nullptr, false);
        if (cj.is_discarded()) throw ParseError("malformed candidate record", lineno);
        cand_ids.push_back(cj.value("id", "cand" + std::to_string(lineno)));
        std::vector<EgoPlanPoint> plan;
        for (const auto& p : cj.at("points"))
          plan.push_back({p[0].get<double>(), p[1].get<double>(), p[2].get<double>(),
                          p[3].get<double>()});
        cs.candidates.push_back(std::move(plan));
      }
      auto breakdowns = score_candidates(rules, cs, reg, g_threads);
      std::size_t chosen = select(breakdowns);
      json report;
      report["selected"] = chosen;
      report["selected_id"] = cand_ids[chosen];
      json arr = json::array();
      for (std::size_t i = 0; i < breakdowns.size(); ++i) {
        json cj{{"id", cand_ids[i]}, {"total", breakdowns[i].total}, {"violated", breakdowns[i].violated}};
        json pairs = json::array();
        for (const auto& p : breakdowns[i].pair_scores) pairs.push_back(p.robustness);
        cj["pair_robustness"] = pairs;
        arr.push_back(cj);
      }
      report["candidates"] = arr;
      std::ofstream out(sc_report);
      out << report.dump(2) << "\n";
      std::cout << "selected: " << cand_ids[chosen] << " (total " << breakdowns[chosen].total
                << ")\n";
      return kExitOk;
    }

    if (*sim_cmd) {
      if (sim_proposer != "at") throw ConfigError("unknown proposer '" + sim_proposer + "'");
      RuleSet rules = resolve_teacher(sim_rules, reg);
      ScenarioSpec spec;
      spec.kind = scenario_kind_from_string(sim_kind);
      spec.rate_hz = sim_rate;
      std::uint64_t seed = g_seed;
      std::size_t n = sim_n;
      Monitor::Proposer proposer = [n, seed](const Frame& env) {
        return at_sampler(env, n, seed ^ static_cast<std::uint64_t>(env.t_index));
      };
      RunMetrics m = run_closed_loop(spec, proposer, rules, reg, sim_steps, seed, nullptr, g_threads);
      std::ofstream out(sim_metrics);
      out << run_metrics_json(m).dump() << "\n";
      std::cout << run_metrics_json(m).dump(2) << "\n";
      return kExitOk;
    }

    if (*ablate_cmd) {
      Dataset data = load_dataset(ab_data);
      json table = json::array();
      for (double alpha : ab_alphas) {
        for (double beta : ab_betas) {
          double conv_sum = 0.0;
          int trivial = 0;
          for (int s = 0; s < ab_seeds; ++s) {
            TrainFlags f = ab_tf;
            f.alpha = alpha;
            f.beta = beta;
            f.seed = g_seed + static_cast<std::uint64_t>(s);
            f.threads = g_threads;
            TrainResult res = run_training(f, reg, data);
            conv_sum += res.report.epochs_run;
            Checkpoint ck{res.structure, res.theta, reg.hash(), f.kappa};
            RuleSet rs = extract_rules(ck, reg, "ablate");
            if (is_trivial(rs, reg)) ++trivial;
          }
          json row{{"alpha", alpha},
                   {"beta", beta},
                   {"convergence_epochs", conv_sum / ab_seeds},
                   {"trivial_ratio", static_cast<double>(trivial) / ab_seeds}};
          table.push_back(row);
          std::cout << row.dump() << "\n";
        }
      }
      std::ofstream out(ab_out);
      out << json{{"format", "tlr-ablation"}, {"version", 1}, {"rows", table}}.dump(2) << "\n";
      return kExitOk;
    }

    if (*e2e_cmd) {
      std::filesystem::create_directories(e2e_out);
      RuleSet teacher = teacher_city3(reg);
      std::cout << "[1/4] generating " << e2e_n << " demonstrations\n";
      std::vector<std::string> ids = {"SafeTTC",     "OvertakingContext",   "InDrivable",
                                      "Comfortable", "SpeedLimitCompliant"};
      auto specs = specs_for_kinds("following,change_lane,turn,stopping", 5.0, 20);
      DemoConfig dcfg;
      dcfg.threads = g_threads;
      Dataset demos = generate_demonstrations(teacher, reg, specs, e2e_n, g_seed, dcfg);
      save_dataset(demos, e2e_out + "/demos.jsonl");

      std::cout << "[2/4] training\n";
      TrainFlags f;
      f.preds = ids;
      f.seed = g_seed;
      f.threads = g_threads;
      TrainResult res = run_training(f, reg, demos);
      save_train_result(res, reg, e2e_out + "/model.ckpt", f.kappa);

      std::cout << "[3/4] extracting rules\n";
      Checkpoint ck{res.structure, res.theta, reg.hash(), f.kappa};
      RuleSet rules = extract_rules(ck, reg, "e2e");
      save_ruleset(rules, e2e_out + "/rules.tlr");

      std::cout << "[4/4] closed-loop simulation\n";
      ScenarioSpec spec;
      spec.kind = ScenarioKind::Following;
      spec.rate_hz = 5.0;
      std::uint64_t seed = g_seed;
      Monitor::Proposer proposer = [seed](const Frame& env) {
        return at_sampler(env, 15, seed ^ static_cast<std::uint64_t>(env.t_index));
      };
      RunMetrics m = run_closed_loop(spec, proposer, rules, reg, 50, seed, &teacher, g_threads);

      json summary;
      summary["teacher_theta"] = teacher.theta;
      summary["recovered_theta"] = res.theta.to_map();
      summary["rules"] = render_rules_text(rules);
      summary["trivial"] = is_trivial(rules, reg);
      summary["epochs"] = res.report.epochs_run;
      summary["run"] = run_metrics_json(m);
      std::ofstream out(e2e_out + "/summary.json");
      out << summary.dump(2) << "\n";
      std::cout << summary.dump(2) << "\n";
      return kExitOk;
    }
  } catch (const ParseError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const std::invalid_argument& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitOk;
}
