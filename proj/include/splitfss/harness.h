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

// Experiment driver behind the command-line tool: dataset selection, the
// four run modes, report emission and the privacy audits.

#ifndef SPLITFSS_HARNESS_H_
#define SPLITFSS_HARNESS_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "splitfss/dataset.h"
#include "splitfss/protocol.h"
#include "splitfss/stats.h"
#include "splitfss/transport.h"

namespace splitfss {

struct RunOptions {
  Mode mode = Mode::kUShapedPrivate;
  int network = 1;                   // 1 or 2
  std::string network_config;        // JSON file; overrides `network`
  std::string dataset = "mnist";     // mnist, fmnist or synthetic
  std::optional<size_t> limit;       // training examples kept
  std::optional<size_t> test_limit;  // test examples kept
  size_t epochs = 2;
  size_t batch = 16;
  double lr = 1.0;
  uint64_t seed = 1;
  int ring_bits = 64;
  int frac_bits = 13;
  std::string train_images, train_labels, test_images, test_labels;

  // Role this process plays; kAll runs every role on threads here.
  std::optional<Role> role;  // nullopt = all
  std::optional<Endpoint> listen;
  std::vector<Endpoint> connect;  // lower-numbered peers, in role order
  Backend backend = Backend::kInProcess;

  SessionConfig session_config() const;
};

struct Datasets {
  Dataset train;
  Dataset test;
};

// MNIST and Fashion-MNIST read the four IDX paths; synthetic draws
// limit (default 4000) training and test_limit (default 1000) test blobs
// around the same class centres.
Datasets load_datasets(const RunOptions& opts, const FixedConfig& cfg);

inline constexpr double kBytesPerMb = 1e6;

struct RunReport {
  std::string mode;
  std::string network;
  std::string dataset;
  size_t epochs = 0;
  size_t train_samples = 0;
  size_t test_samples = 0;
  double accuracy_pct = 0;
  double train_minutes = 0;
  double test_seconds = 0;
  // Bytes; emitted in MB.
  uint64_t client_bytes = 0;
  uint64_t server_bytes = 0;
  uint64_t preprocessing_bytes = 0;
  uint64_t testing_bytes = 0;
  std::vector<double> epoch_loss;

  std::string to_json() const;  // one object
  static std::string csv_header();
  std::string csv_row() const;
};

void write_reports(std::ostream& out, const std::vector<RunReport>& reports,
                   const std::string& format);  // "json" or "csv"

// Trains, then evaluates on the test split.
RunReport cmd_train(const RunOptions& opts);
// Inference only: the initial model for the seed over the test split, which
// isolates the test-phase traffic.
RunReport cmd_eval(const RunOptions& opts);
// Every mode on network 1 and network 2 with otherwise identical options.
std::vector<RunReport> cmd_bench(const RunOptions& opts);

// Plays one role over TCP. The client returns a report built from its own
// counters, so only the client column and accuracy are complete; the other
// comm columns count only bytes the client itself sent. Other roles return
// an empty report.
RunReport run_remote_role(const RunOptions& opts);

struct MaskAudit {
  uint64_t atm[2] = {0, 0};
  ChiSquare uniform[2];
  ChiSquare two_sample;
  bool passed(double alpha = 1e-3) const {
    return uniform[0].p_value > alpha && uniform[1].p_value > alpha &&
           two_sample.p_value > alpha;
  }
};

// Histograms x_pub = ATm + alpha over `samples` dealer masks at n = 8 for two
// fixed ATm values. `constant_mask` replaces the masks with one fixed value
// (negative control).
MaskAudit audit_mask_uniformity(uint64_t samples, uint64_t atm0, uint64_t atm1,
                                uint64_t seed, bool constant_mask = false);

struct LiaAudit {
  uint64_t trials = 0;
  size_t classes = 0;
  double plain_accuracy = 0;
  double plain_std_error = 0;
  double share_accuracy = 0;
  double share_std_error = 0;
};

// Label inference game against a one-layer output head with random weights.
// Each trial draws a label and an activation, computes the MSE gradient at
// the head output and lets the adversary guess the label as the index of
// the largest-magnitude entry of (a) the plaintext gradient and (b) the
// additive share a server would receive.
LiaAudit audit_lia_game(uint64_t trials, size_t classes, uint64_t seed,
                        size_t width = 64);

struct LabelAudit {
  size_t frames = 0;
  size_t label_hits = 0;       // frames containing a label-derived pattern
  size_t label_frames = 0;     // frames of kind kLabels
  std::map<Role, ChiSquare> gradient_uniformity;  // per receiving server
  bool passed(double alpha = 1e-3) const;
};

// Scans a wiretap for the label bytes and encoded one-hot targets of every
// training batch the client would form, and tests the byte histogram of
// client-to-server gradient payloads (meaningful at n = 8).
LabelAudit audit_label_confinement(const Wiretap& tap, const SessionConfig& cfg,
                                   const Dataset& train);

}  // namespace splitfss

#endif  // SPLITFSS_HARNESS_H_
