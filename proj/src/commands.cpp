#include "raisdr/commands.hpp"

#include <csignal>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <pthread.h>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "raisdr/csv.hpp"
#include "raisdr/error.hpp"
#include "raisdr/evaluation.hpp"
#include "raisdr/fixtures.hpp"
#include "raisdr/http_api.hpp"
#include "raisdr/image_io.hpp"
#include "raisdr/simulate.hpp"

namespace raisdr {

using nlohmann::json;

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
  out.flush();
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
}

void make_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string());
}

int report_error(const Error& e, std::ostream& err) {
  err << to_string(e.code()) << ": " << e.detail() << '\n';
  return e.code() == ErrorCode::IoError ? kExitEnvironmentError : kExitInputError;
}

json row_json(const ReproductionRow& r) {
  json expected = json::object();
  const auto got = headline_cells(r.metrics);
  json reported = json::object();
  for (std::size_t i = 0; i < kHeadlineCells.size(); ++i) {
    expected[std::string(kHeadlineCells[i])] = r.row.expected[i];
    reported[std::string(kHeadlineCells[i])] =
        got[i] ? json(*got[i]) : json(nullptr);
  }
  return {{"label", r.row.label()},
          {"table", r.row.table},
          {"system", r.row.system},
          {"scheme", to_string(r.row.scheme)},
          {"unit", to_string(r.row.unit)},
          {"expected_percent", std::move(expected)},
          {"reported_percent", std::move(reported)},
          {"headline", headline(r.metrics)},
          {"metrics", to_json(r.metrics)},
          {"mismatches", r.mismatches}};
}

void print_rows(const std::vector<ReproductionRow>& rows, std::ostream& out) {
  out << std::left << std::setw(13) << "table" << std::setw(10) << "system"
      << std::setw(7) << "scheme" << std::right << std::setw(6) << "TN"
      << std::setw(6) << "FP" << std::setw(5) << "FN" << std::setw(5) << "TP"
      << "  " << std::left << std::setw(36) << "F1neg; (Sens, Spec, PPV, NPV, Acc)"
      << "status\n";
  for (const auto& r : rows) {
    const auto& cm = r.row.cm;
    out << std::left << std::setw(13) << r.row.table << std::setw(10)
        << r.row.system << std::setw(7) << to_string(r.row.scheme) << std::right
        << std::setw(6) << cm.tn << std::setw(6) << cm.fp << std::setw(5)
        << cm.fn << std::setw(5) << cm.tp << "  " << std::left << std::setw(36)
        << headline(r.metrics) << (r.mismatches.empty() ? "ok" : "MISMATCH")
        << '\n';
  }
  out << std::right;
}

void apply_perturbation(std::vector<PublishedRow>& rows, const std::string& spec) {
  const auto colon = spec.rfind(':');
  if (colon == std::string::npos) {
    throw Error(ErrorCode::ValueError, "perturbation must be LABEL:CELL=VALUE");
  }
  const std::string label = spec.substr(0, colon);
  const std::string assignment = spec.substr(colon + 1);
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw Error(ErrorCode::ValueError, "perturbation must be LABEL:CELL=VALUE");
  }
  const std::string key = assignment.substr(0, eq);
  std::uint64_t value = 0;
  try {
    value = std::stoull(assignment.substr(eq + 1));
  } catch (const std::exception&) {
    throw Error(ErrorCode::ValueError, "bad perturbation value");
  }
  for (auto& row : rows) {
    if (row.label() != label) continue;
    if (key == "TP") row.cm.tp = value;
    else if (key == "TN") row.cm.tn = value;
    else if (key == "FP") row.cm.fp = value;
    else if (key == "FN") row.cm.fn = value;
    else throw Error(ErrorCode::ValueError, "unknown cell '" + key + "'");
    return;
  }
  throw Error(ErrorCode::ValueError, "no published row '" + label + "'");
}

}  // namespace

int cmd_reproduce(const ReproduceOptions& opts, std::ostream& out,
                  std::ostream& err) {
  try {
    if (opts.matrix) {
      const auto cm = parse_matrix_spec(*opts.matrix);
      const auto m = compute_metrics(cm);
      const auto cells = headline_cells(m);
      out << "TN " << cm.tn << "  FP " << cm.fp << "  FN " << cm.fn << "  TP "
          << cm.tp << "  F1neg; (Sens, Spec, PPV, NPV, Acc)  " << headline(m)
          << '\n';
      json j = {{"matrix", *opts.matrix}, {"headline", headline(m)},
                {"metrics", to_json(m)}};
      int code = kExitOk;
      for (const auto& row : published_rows()) {
        if (!(row.cm == cm)) continue;
        j["published_as"].push_back(row.label());
        for (std::size_t i = 0; i < cells.size(); ++i) {
          if (cells[i] != row.expected[i]) code = kExitMismatch;
        }
      }
      if (opts.out) write_file(*opts.out / "matrix.json", j.dump(2) + "\n");
      return code;
    }

    std::vector<PublishedRow> rows(published_rows().begin(), published_rows().end());
    if (opts.perturb) apply_perturbation(rows, *opts.perturb);
    const auto results = reproduce(rows);
    print_rows(results, out);

    json j = {{"rows", json::array()}};
    bool ok = true;
    for (const auto& r : results) {
      j["rows"].push_back(row_json(r));
      for (const auto& m : r.mismatches) {
        err << "mismatch " << m << '\n';
        ok = false;
      }
    }
    j["all_match"] = ok;
    if (opts.out) {
      std::ostringstream text;
      print_rows(results, text);
      write_file(*opts.out / "reproduce.json", j.dump(2) + "\n");
      write_file(*opts.out / "reproduce.txt", text.str());
    }
    return ok ? kExitOk : kExitMismatch;
  } catch (const Error& e) {
    return report_error(e, err);
  }
}

int cmd_evaluate(const EvaluateOptions& opts, std::ostream& out,
                 std::ostream& err) {
  try {
    const Cohort cohort = load_cohort(opts.cohort);
    const PredictionSet predictions = load_predictions(opts.predictions.string());
    const auto report = evaluate(cohort, predictions, resolve_scenario(opts.scenario));
    out << to_text(report);
    if (opts.out) {
      make_dir(*opts.out);
      write_file(*opts.out / "report.json", to_json(report).dump(2) + "\n");
      write_file(*opts.out / "pairs.csv", pairs_to_csv(report.pairs));
      if (report.roc) write_file(*opts.out / "roc.csv", roc_to_csv(*report.roc));
      if (!report.fairness.empty()) {
        write_file(*opts.out / "fairness.csv", fairness_csv(report.fairness));
      }
    }
    return kExitOk;
  } catch (const Error& e) {
    return report_error(e, err);
  }
}

int cmd_fairness(const FairnessOptions& opts, std::ostream& out,
                 std::ostream& err) {
  try {
    const auto pairs = parse_pairs_csv(read_text_file(opts.pairs.string()));
    const auto group =
        GroupSpec::parse(opts.attribute, opts.unprivileged, opts.privileged);
    EvalUnit unit = EvalUnit::PerImage;
    if (opts.unit == "patient") unit = EvalUnit::PerPatient;
    else if (opts.unit != "image") {
      throw Error(ErrorCode::ValueError, "unit must be image or patient");
    }
    const auto to_rational = [](double v) {
      // Bounds are given to at most six decimals.
      return Rational(static_cast<std::int64_t>(std::llround(v * 1e6)), 1000000);
    };
    if (!(opts.di_lower > 0 && opts.di_lower <= opts.di_upper)) {
      throw Error(ErrorCode::ValueError, "DI bounds must satisfy 0 < lower <= upper");
    }
    const DiBounds bounds{to_rational(opts.di_lower), to_rational(opts.di_upper)};
    const auto report = fairness_report(pairs, group, unit, bounds, opts.age_boundary);
    const std::vector<FairnessReport> reports{report};
    out << fairness_csv(reports);
    if (opts.out) {
      make_dir(*opts.out);
      write_file(*opts.out / "fairness.csv", fairness_csv(reports));
      write_file(*opts.out / "fairness.json", to_json(report).dump(2) + "\n");
    }
    return kExitOk;
  } catch (const Error& e) {
    return report_error(e, err);
  }
}

int cmd_simulate(const SimulateOptions& opts, std::ostream& out,
                 std::ostream& err) {
  try {
    SyntheticParams params = SyntheticParams::validation_cohort();
    if (opts.params) {
      try {
        params = SyntheticParams::from_json(
            json::parse(read_text_file(opts.params->string())));
      } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidParams, e.what());
      }
    }
    const FlipRates rates = FlipRates::parse(opts.flip_rates);
    const Cohort cohort = generate_synthetic(params, opts.seed);
    const auto sim = simulate_predictions(cohort, rates, opts.seed);

    make_dir(opts.out);
    write_file(opts.out / "cohort.csv", to_csv(cohort));
    write_file(opts.out / "predictions.csv", predictions_to_csv(sim.predictions));
    write_file(opts.out / "params.json", params.to_json().dump(2) + "\n");
    const json flips = {{"seed", opts.seed},
                        {"fn", sim.flipped_fn},
                        {"fp", sim.flipped_fp},
                        {"ungradable", sim.flipped_ungradable}};
    write_file(opts.out / "flips.json", flips.dump(2) + "\n");
    out << "patients " << cohort.patients().size() << "  images "
        << cohort.images().size() << "  flipped FN " << sim.flipped_fn.size()
        << " FP " << sim.flipped_fp.size() << " UG "
        << sim.flipped_ungradable.size() << '\n';
    return kExitOk;
  } catch (const Error& e) {
    return report_error(e, err);
  }
}

int cmd_preprocess(const PreprocessOptions& opts, std::ostream& out,
                   std::ostream& err) {
  try {
    const RawImage raw = read_image(opts.input);
    const StandardImage img =
        preprocess(raw, PreprocessConfig{}, opts.input.filename().string());
    write_standard_image(opts.output, img);
    const auto box = img.provenance().content_box();
    out << opts.output.string() << "  content box " << box.x0 << ',' << box.y0
        << ' ' << box.x1 << ',' << box.y1 << '\n';
    return kExitOk;
  } catch (const Error& e) {
    return report_error(e, err);
  }
}

namespace {

std::shared_ptr<const InferenceBackend> make_backend(const std::string& spec,
                                                     const ModelThresholds& t) {
  if (spec.starts_with("stub:")) {
    return std::make_shared<StubBackend>(load_manifest(spec.substr(5), t), t);
  }
  if (spec.starts_with("http:")) {
    return std::make_shared<HttpBackend>(spec.substr(5), t);
  }
  throw Error(ErrorCode::ValueError, "backend must be stub:PATH or http:URL");
}

}  // namespace

int cmd_serve(const ServeOptions& opts, std::ostream& out, std::ostream& err) {
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  std::unique_ptr<ScreeningService> service;
  try {
    ServiceConfig config;
    for (const auto& t : opts.thresholds) {
      const auto eq = t.find('=');
      if (eq == std::string::npos) {
        throw Error(ErrorCode::ValueError, "threshold must be MODEL=VALUE");
      }
      double v = 0;
      try {
        v = std::stod(t.substr(eq + 1));
      } catch (const std::exception&) {
        throw Error(ErrorCode::ValueError, "bad threshold '" + t + "'");
      }
      config.policy.thresholds.set(parse_model_id(t.substr(0, eq)), v);
    }
    config.store_dir = opts.store;
    service = std::make_unique<ScreeningService>(
        make_backend(opts.backend, config.policy.thresholds), std::move(config));
    for (const auto& d : opts.datasets) {
      const auto eq = d.find('=');
      const auto comma = d.find(',', eq == std::string::npos ? 0 : eq);
      if (eq == std::string::npos || comma == std::string::npos) {
        throw Error(ErrorCode::ValueError, "dataset must be NAME=COHORT,PREDICTIONS");
      }
      service->add_dataset(d.substr(0, eq),
                           Dataset{load_cohort(d.substr(eq + 1, comma - eq - 1)),
                                   load_predictions(d.substr(comma + 1))});
    }
  } catch (const Error& e) {
    return report_error(e, err);
  }

  httplib::Server server;
  // The library default adds SO_REUSEPORT, which would let a second
  // instance share the port instead of failing to bind.
  server.set_socket_options([](socket_t sock) {
    const int yes = 1;
    ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  install_routes(server, *service, opts.token);
  int port = opts.port;
  if (port == 0) {
    port = server.bind_to_any_port(opts.host);
  } else if (!server.bind_to_port(opts.host, port)) {
    port = -1;
  }
  if (port <= 0) {
    err << "BindError: cannot bind " << opts.host << ':' << opts.port << '\n';
    return kExitEnvironmentError;
  }
  std::thread listener([&server] { server.listen_after_bind(); });
  server.wait_until_ready();
  out << "listening on " << opts.host << ':' << port << std::endl;

  int sig = 0;
  sigwait(&signals, &sig);
  server.stop();
  listener.join();
  try {
    service->flush();
  } catch (const Error& e) {
    return report_error(e, err);
  }
  out << "stopped" << std::endl;
  return kExitOk;
}

}  // namespace raisdr
