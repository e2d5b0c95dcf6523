#include <iostream>

#include "CLI11.hpp"
#include "raisdr/commands.hpp"

int main(int argc, char** argv) {
  using namespace raisdr;
  CLI::App app{"Diabetic retinopathy screening and evaluation toolkit"};
  app.require_subcommand(1);

  ReproduceOptions reproduce;
  auto* rep = app.add_subcommand("reproduce", "Recompute the published tables");
  rep->add_option("--matrix", reproduce.matrix, "TP=..,FP=..,FN=..,TN=..");
  rep->add_option("--perturb", reproduce.perturb,
                  "LABEL:CELL=VALUE, e.g. per-patient/proposed/RDR:TP=50");
  rep->add_option("--out", reproduce.out, "Directory for report files");

  EvaluateOptions evaluate;
  auto* ev = app.add_subcommand("evaluate", "Evaluate predictions on a cohort");
  ev->add_option("--cohort", evaluate.cohort)->required();
  ev->add_option("--predictions", evaluate.predictions)->required();
  ev->add_option("--scenario", evaluate.scenario, "experiment-N or key=value filters");
  ev->add_option("--out", evaluate.out);

  FairnessOptions fairness;
  auto* fa = app.add_subcommand("fairness", "DI and EOD over a pairs table");
  fa->add_option("--pairs", fairness.pairs)->required();
  fa->add_option("--attribute", fairness.attribute, "sex, age, projection, laterality")
      ->required();
  fa->add_option("--unprivileged", fairness.unprivileged)->required();
  fa->add_option("--privileged", fairness.privileged)->required();
  fa->add_option("--unit", fairness.unit, "image or patient");
  fa->add_option("--age-boundary", fairness.age_boundary);
  fa->add_option("--di-lower", fairness.di_lower);
  fa->add_option("--di-upper", fairness.di_upper);
  fa->add_option("--out", fairness.out);

  SimulateOptions simulate;
  auto* si = app.add_subcommand("simulate", "Synthetic cohort and predictions");
  si->add_option("--params", simulate.params, "JSON parameters");
  si->add_option("--seed", simulate.seed);
  si->add_option("--flip-rates", simulate.flip_rates, "FN=r,FP=r,UG=r");
  si->add_option("--out", simulate.out)->required();

  PreprocessOptions prep;
  auto* pp = app.add_subcommand("preprocess", "Standardize one fundus photograph");
  pp->add_option("input", prep.input)->required();
  pp->add_option("output", prep.output)->required();

  ServeOptions serve;
  auto* sv = app.add_subcommand("serve", "Run the screening service");
  sv->add_option("--host", serve.host);
  sv->add_option("--port", serve.port);
  sv->add_option("--backend", serve.backend, "stub:PATH or http:URL")->required();
  sv->add_option("--store", serve.store, "Persistence directory");
  sv->add_option("--token", serve.token, "Bearer token");
  sv->add_option("--threshold", serve.thresholds, "MODEL=VALUE");
  sv->add_option("--dataset", serve.datasets, "NAME=COHORT,PREDICTIONS");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInputError;
  }

  if (*rep) return cmd_reproduce(reproduce, std::cout, std::cerr);
  if (*ev) return cmd_evaluate(evaluate, std::cout, std::cerr);
  if (*fa) return cmd_fairness(fairness, std::cout, std::cerr);
  if (*si) return cmd_simulate(simulate, std::cout, std::cerr);
  if (*pp) return cmd_preprocess(prep, std::cout, std::cerr);
  if (*sv) return cmd_serve(serve, std::cout, std::cerr);
  return kExitInputError;
}
