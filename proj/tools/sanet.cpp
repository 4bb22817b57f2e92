#include <exception>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sanet/errors.hpp"
#include "sanet/runconfig.hpp"

int main(int argc, char** argv) {
  CLI::App app{"socially aware spatio-temporal demand forecasting"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> sets;
  std::vector<std::string> report_inputs;

  CLI::App* synth =
      app.add_subcommand("synth", "write a seeded synthetic dataset");
  CLI::App* train = app.add_subcommand("train", "train a neural model");
  CLI::App* evaluate = app.add_subcommand(
      "evaluate", "evaluate a checkpoint or classical baseline on a split");
  CLI::App* predict =
      app.add_subcommand("predict", "write the next-hour demand grid");
  CLI::App* report = app.add_subcommand(
      "report", "aggregate metrics CSVs into a comparison table");
  CLI::App* map_cmd = app.add_subcommand(
      "map", "write the per-cell MPE field and its Moran's I");
  for (CLI::App* c : {synth, train, evaluate, predict, report, map_cmd}) {
    c->add_option("--config", config_path,
                  "run configuration file (key = value lines)");
    c->add_option("--set", sets, "override one key (key=value, repeatable)");
  }
  report->add_option("inputs", report_inputs, "metrics CSV files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const sanet::RunConfig cfg = sanet::load_run_config(config_path, sets);
    if (synth->parsed()) {
      sanet::cmd_synth(cfg);
    } else if (train->parsed()) {
      sanet::cmd_train(cfg);
    } else if (evaluate->parsed()) {
      sanet::cmd_evaluate(cfg);
    } else if (predict->parsed()) {
      sanet::cmd_predict(cfg);
    } else if (report->parsed()) {
      sanet::cmd_report(cfg, report_inputs);
    } else {
      sanet::cmd_map(cfg);
    }
  } catch (const sanet::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const sanet::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
