/*
 * Copyright 2026 The splitfss Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// splitfss: train, evaluate and benchmark split-learning sessions, and run
// the privacy audits.

#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "splitfss/errors.h"
#include "splitfss/harness.h"

namespace {

using splitfss::RunOptions;

struct Flags {
  std::string mode = "ushaped-private";
  std::string role = "all";
  std::string listen;
  std::vector<std::string> connect;
  std::string data_dir;
  std::string report;
  std::string format = "json";
  bool tcp = false;
  size_t limit = 0, test_limit = 0;
};

void add_session_flags(CLI::App& app, RunOptions& o, Flags& f) {
  auto env = [](CLI::Option* opt, const char* name) { opt->envname(name); };
  env(app.add_option("--mode", f.mode,
                     "local-public, vanilla-public, ushaped-public or ushaped-private")
          ->capture_default_str(),
      "SPLITFSS_MODE");
  env(app.add_option("--network", o.network, "built-in network 1 or 2")
          ->check(CLI::IsMember({1, 2}))
          ->capture_default_str(),
      "SPLITFSS_NETWORK");
  env(app.add_option("--network-config", o.network_config, "network JSON file"),
      "SPLITFSS_NETWORK_CONFIG");
  env(app.add_option("--dataset", o.dataset)
          ->check(CLI::IsMember({"mnist", "fmnist", "synthetic"}))
          ->capture_default_str(),
      "SPLITFSS_DATASET");
  env(app.add_option("--limit", f.limit, "training examples kept (0 = all)"),
      "SPLITFSS_LIMIT");
  env(app.add_option("--test-limit", f.test_limit, "test examples kept (0 = all)"),
      "SPLITFSS_TEST_LIMIT");
  env(app.add_option("--epochs", o.epochs)->capture_default_str(), "SPLITFSS_EPOCHS");
  env(app.add_option("--batch", o.batch)->capture_default_str(), "SPLITFSS_BATCH");
  env(app.add_option("--lr", o.lr)->capture_default_str(), "SPLITFSS_LR");
  env(app.add_option("--seed", o.seed)->capture_default_str(), "SPLITFSS_SEED");
  env(app.add_option("--ring-bits", o.ring_bits)
          ->check(CLI::IsMember({8, 16, 32, 64}))
          ->capture_default_str(),
      "SPLITFSS_RING_BITS");
  env(app.add_option("--frac-bits", o.frac_bits)->capture_default_str(),
      "SPLITFSS_FRAC_BITS");
  env(app.add_option("--data-dir", f.data_dir,
                     "directory holding the four standard IDX file names"),
      "SPLITFSS_DATA_DIR");
  env(app.add_option("--train-images", o.train_images), "SPLITFSS_TRAIN_IMAGES");
  env(app.add_option("--train-labels", o.train_labels), "SPLITFSS_TRAIN_LABELS");
  env(app.add_option("--test-images", o.test_images), "SPLITFSS_TEST_IMAGES");
  env(app.add_option("--test-labels", o.test_labels), "SPLITFSS_TEST_LABELS");
  env(app.add_option("--role", f.role)
          ->check(CLI::IsMember({"client", "p0", "p1", "dealer", "all"}))
          ->capture_default_str(),
      "SPLITFSS_ROLE");
  env(app.add_option("--listen", f.listen, "host:port this role accepts peers on"),
      "SPLITFSS_LISTEN");
  env(app.add_option("--connect", f.connect,
                     "host:port of each lower role (client, p0, p1), in order")
          ->delimiter(','),
      "SPLITFSS_CONNECT");
  env(app.add_flag("--tcp", f.tcp, "with --role all, link the roles over loopback TCP"),
      "SPLITFSS_TCP");
  env(app.add_option("--report", f.report, "write the report here instead of stdout"),
      "SPLITFSS_REPORT");
  env(app.add_option("--format", f.format)
          ->check(CLI::IsMember({"json", "csv"}))
          ->capture_default_str(),
      "SPLITFSS_FORMAT");
}

void finish(RunOptions& o, const Flags& f) {
  o.mode = splitfss::parse_mode(f.mode);
  if (f.limit != 0) o.limit = f.limit;
  if (f.test_limit != 0) o.test_limit = f.test_limit;
  if (!f.data_dir.empty()) {
    const std::string d = f.data_dir + "/";
    if (o.train_images.empty()) o.train_images = d + "train-images-idx3-ubyte";
    if (o.train_labels.empty()) o.train_labels = d + "train-labels-idx1-ubyte";
    if (o.test_images.empty()) o.test_images = d + "t10k-images-idx3-ubyte";
    if (o.test_labels.empty()) o.test_labels = d + "t10k-labels-idx1-ubyte";
  }
  if (f.role == "client") o.role = splitfss::Role::kClient;
  if (f.role == "p0") o.role = splitfss::Role::kServer0;
  if (f.role == "p1") o.role = splitfss::Role::kServer1;
  if (f.role == "dealer") o.role = splitfss::Role::kDealer;
  if (!f.listen.empty()) o.listen = splitfss::Endpoint::parse(f.listen);
  for (const std::string& c : f.connect) o.connect.push_back(splitfss::Endpoint::parse(c));
  o.backend = f.tcp ? splitfss::Backend::kTcp : splitfss::Backend::kInProcess;
}

void emit(const std::vector<splitfss::RunReport>& reports, const Flags& f) {
  if (f.report.empty()) {
    splitfss::write_reports(std::cout, reports, f.format);
    return;
  }
  std::ofstream out(f.report);
  if (!out) throw splitfss::InvalidConfig("cannot write " + f.report);
  splitfss::write_reports(out, reports, f.format);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Split learning with secret-shared server layers"};
  app.require_subcommand(1);

  RunOptions opts;
  Flags flags;
  CLI::App* train = app.add_subcommand("train", "train, then report test accuracy and traffic");
  CLI::App* eval = app.add_subcommand("eval", "inference-only session with the initial model");
  CLI::App* bench = app.add_subcommand("bench", "all modes on network 1 and 2");
  for (CLI::App* sub : {train, eval, bench}) add_session_flags(*sub, opts, flags);

  uint64_t samples = 100000, atm0 = 0, atm1 = 77, trials = 5000, audit_seed = 1;
  size_t classes = 10;
  bool constant_mask = false;
  CLI::App* mask = app.add_subcommand("audit-mask", "chi-square of x_pub over fresh masks (n = 8)");
  mask->add_option("--samples", samples)->capture_default_str();
  mask->add_option("--atm", atm0, "first fixed ATm value")->capture_default_str();
  mask->add_option("--atm2", atm1, "second fixed ATm value")->capture_default_str();
  mask->add_option("--seed", audit_seed)->capture_default_str();
  mask->add_flag("--constant-mask", constant_mask, "negative control");
  CLI::App* lia = app.add_subcommand("audit-lia", "label inference game");
  lia->add_option("--trials", trials)->capture_default_str();
  lia->add_option("--classes", classes)->capture_default_str();
  lia->add_option("--seed", audit_seed)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*mask) {
      const splitfss::MaskAudit a =
          splitfss::audit_mask_uniformity(samples, atm0, atm1, audit_seed, constant_mask);
      for (int v = 0; v < 2; ++v) {
        std::cout << "atm=" << a.atm[v] << " chi2=" << a.uniform[v].statistic
                  << " p=" << a.uniform[v].p_value << '\n';
      }
      std::cout << "two-sample chi2=" << a.two_sample.statistic
                << " p=" << a.two_sample.p_value << '\n'
                << (a.passed() ? "uniform" : "NOT uniform") << '\n';
      return a.passed() ? 0 : 2;
    }
    if (*lia) {
      const splitfss::LiaAudit a = splitfss::audit_lia_game(trials, classes, audit_seed);
      std::cout << "trials=" << a.trials << " classes=" << a.classes << '\n'
                << "plaintext gradients: " << 100 * a.plain_accuracy << "% +- "
                << 100 * a.plain_std_error << '\n'
                << "gradient shares:     " << 100 * a.share_accuracy << "% +- "
                << 100 * a.share_std_error << '\n';
      return 0;
    }
    finish(opts, flags);
    if (*bench) {
      emit(splitfss::cmd_bench(opts), flags);
    } else if (opts.role) {
      const splitfss::RunReport r = splitfss::run_remote_role(opts);
      if (*opts.role == splitfss::Role::kClient) emit({r}, flags);
    } else {
      emit({*train ? splitfss::cmd_train(opts) : splitfss::cmd_eval(opts)}, flags);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
