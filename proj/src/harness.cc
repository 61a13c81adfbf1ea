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

#include "splitfss/harness.h"

#include <algorithm>
#include <chrono>
#include <cstring>
#include <iomanip>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "splitfss/codec.h"
#include "splitfss/errors.h"
#include "splitfss/prg.h"
#include "splitfss/sharing.h"

namespace splitfss {

namespace {

constexpr size_t kDefaultSyntheticTrain = 4000;
constexpr size_t kDefaultSyntheticTest = 1000;

NetworkSpec pick_network(const RunOptions& opts, size_t classes) {
  if (!opts.network_config.empty()) return NetworkSpec::load(opts.network_config);
  if (opts.network == 1) return network1(classes);
  if (opts.network == 2) return network2(classes);
  throw InvalidConfig("network must be 1 or 2, got " + std::to_string(opts.network));
}

std::string network_label(const RunOptions& opts) {
  return opts.network_config.empty() ? "network" + std::to_string(opts.network)
                                     : opts.network_config;
}

std::string fmt_mb(uint64_t bytes) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(6) << bytes / kBytesPerMb;
  return out.str();
}

RunReport make_report(const RunOptions& opts, const Datasets& data,
                      const SessionResult& r, const CommSummary& s) {
  RunReport rep;
  rep.mode = mode_name(opts.mode);
  rep.network = network_label(opts);
  rep.dataset = opts.dataset;
  rep.epochs = opts.epochs;
  rep.train_samples = data.train.size();
  rep.test_samples = data.test.size();
  rep.accuracy_pct = 100.0 * r.test_accuracy;
  rep.train_minutes = r.train_seconds / 60.0;
  rep.test_seconds = r.test_seconds;
  rep.client_bytes = s.client_train;
  rep.server_bytes = s.server_train;
  rep.preprocessing_bytes = s.preprocessing;
  rep.testing_bytes = s.testing;
  rep.epoch_loss = r.epoch_loss;
  return rep;
}

}  // namespace

SessionConfig RunOptions::session_config() const {
  SessionConfig cfg;
  cfg.mode = mode;
  cfg.fixed.bit_width = ring_bits;
  cfg.fixed.frac_bits = frac_bits;
  cfg.fixed.validate();
  cfg.train.learning_rate = lr;
  cfg.train.batch_size = batch;
  cfg.train.epochs = epochs;
  cfg.train.seed = seed;
  cfg.network = pick_network(*this, 10);
  return cfg;
}

Datasets load_datasets(const RunOptions& opts, const FixedConfig& cfg) {
  if (opts.dataset == "synthetic") {
    const size_t n_train = opts.limit.value_or(kDefaultSyntheticTrain);
    const size_t n_test = opts.test_limit.value_or(kDefaultSyntheticTest);
    const Shape shape = pick_network(opts, 10).input_shape;
    Dataset all = gen_synthetic(n_train + n_test, shape, 10, opts.seed, cfg);
    Datasets out;
    std::vector<size_t> train_rows(n_train), test_rows(n_test);
    for (size_t i = 0; i < n_train; ++i) train_rows[i] = i;
    for (size_t i = 0; i < n_test; ++i) test_rows[i] = n_train + i;
    for (auto [rows, dst] : {std::pair{&train_rows, &out.train}, {&test_rows, &out.test}}) {
      dst->images = all.batch_images(*rows);
      dst->labels.reserve(rows->size());
      for (size_t r : *rows) dst->labels.push_back(all.labels[r]);
      dst->classes = all.classes;
    }
    return out;
  }
  if (opts.dataset != "mnist" && opts.dataset != "fmnist") {
    throw InvalidConfig("unknown dataset " + opts.dataset);
  }
  for (const std::string* p : {&opts.train_images, &opts.train_labels,
                               &opts.test_images, &opts.test_labels}) {
    if (p->empty()) throw InvalidConfig(opts.dataset + " needs all four IDX paths");
  }
  return {load_idx(opts.train_images, opts.train_labels, opts.limit, cfg),
          load_idx(opts.test_images, opts.test_labels, opts.test_limit, cfg)};
}

std::string RunReport::to_json() const {
  nlohmann::ordered_json j;
  j["mode"] = mode;
  j["network"] = network;
  j["dataset"] = dataset;
  j["epochs"] = epochs;
  j["train_samples"] = train_samples;
  j["test_samples"] = test_samples;
  j["testing_accuracy_pct"] = accuracy_pct;
  j["training_time_min"] = train_minutes;
  j["testing_time_s"] = test_seconds;
  j["client_comm_mb"] = client_bytes / kBytesPerMb;
  j["server_comm_mb"] = server_bytes / kBytesPerMb;
  j["preprocessing_comm_mb"] = preprocessing_bytes / kBytesPerMb;
  j["testing_comm_mb"] = testing_bytes / kBytesPerMb;
  j["epoch_loss"] = epoch_loss;
  return j.dump(2);
}

std::string RunReport::csv_header() {
  return "mode,network,dataset,epochs,train_samples,test_samples,"
         "testing_accuracy_pct,training_time_min,testing_time_s,client_comm_mb,"
         "server_comm_mb,preprocessing_comm_mb,testing_comm_mb";
}

std::string RunReport::csv_row() const {
  std::ostringstream out;
  out << mode << ',' << network << ',' << dataset << ',' << epochs << ','
      << train_samples << ',' << test_samples << ',' << std::fixed
      << std::setprecision(2) << accuracy_pct << ',' << std::setprecision(4)
      << train_minutes << ',' << test_seconds << ',' << fmt_mb(client_bytes) << ','
      << fmt_mb(server_bytes) << ',' << fmt_mb(preprocessing_bytes) << ','
      << fmt_mb(testing_bytes);
  return out.str();
}

void write_reports(std::ostream& out, const std::vector<RunReport>& reports,
                   const std::string& format) {
  if (format == "csv") {
    out << RunReport::csv_header() << '\n';
    for (const RunReport& r : reports) out << r.csv_row() << '\n';
  } else if (format == "json") {
    if (reports.size() == 1) {
      out << reports[0].to_json() << '\n';
      return;
    }
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const RunReport& r : reports) {
      arr.push_back(nlohmann::ordered_json::parse(r.to_json()));
    }
    out << arr.dump(2) << '\n';
  } else {
    throw InvalidConfig("format must be json or csv, got " + format);
  }
}

RunReport cmd_train(const RunOptions& opts) {
  SessionConfig cfg = opts.session_config();
  const Datasets data = load_datasets(opts, cfg.fixed);
  cfg.network = pick_network(opts, data.train.classes);
  TrafficCounters counters;
  const SessionResult r = run_session(cfg, data.train, &data.test, counters, nullptr,
                                      opts.backend);
  return make_report(opts, data, r, summarize(counters));
}

RunReport cmd_eval(const RunOptions& opts) {
  RunOptions o = opts;
  o.epochs = 0;
  return cmd_train(o);
}

std::vector<RunReport> cmd_bench(const RunOptions& opts) {
  std::vector<RunReport> out;
  for (int net : {1, 2}) {
    for (Mode m : {Mode::kLocalPublic, Mode::kVanillaPublic, Mode::kUShapedPublic,
                   Mode::kUShapedPrivate}) {
      RunOptions o = opts;
      o.network = net;
      o.network_config.clear();
      o.mode = m;
      out.push_back(cmd_train(o));
    }
  }
  return out;
}

RunReport run_remote_role(const RunOptions& opts) {
  if (!opts.role) throw InvalidConfig("run_remote_role needs a role");
  const Role role = *opts.role;
  SessionConfig cfg = opts.session_config();
  std::optional<TcpListener> listener;
  if (opts.listen) listener.emplace(*opts.listen);

  std::map<Role, Endpoint> peers;
  size_t next = 0;
  for (Role r : session_roles(cfg.mode)) {
    if (r >= role) continue;
    if (next >= opts.connect.size()) {
      throw InvalidConfig(std::string(role_name(role)) + " needs --connect for " +
                          role_name(r));
    }
    peers[r] = opts.connect[next++];
  }

  TrafficCounters counters;
  auto owned = connect_tcp(role, cfg.mode, listener ? &*listener : nullptr, peers,
                           &counters);
  ChannelMap map;
  for (auto& [r, c] : owned) map[r] = c.get();

  RunReport rep;
  rep.mode = mode_name(cfg.mode);
  rep.network = network_label(opts);
  rep.dataset = opts.dataset;
  rep.epochs = opts.epochs;
  try {
    switch (role) {
      case Role::kClient: {
        const Datasets data = load_datasets(opts, cfg.fixed);
        cfg.network = pick_network(opts, data.train.classes);
        Client client(cfg, data.train, &data.test, map);
        client.synchronize();
        const auto t0 = std::chrono::steady_clock::now();
        client.train();
        const auto t1 = std::chrono::steady_clock::now();
        const double acc = client.test();
        const auto t2 = std::chrono::steady_clock::now();
        SessionResult r;
        r.test_accuracy = acc;
        r.epoch_loss = client.epoch_loss();
        r.train_seconds = std::chrono::duration<double>(t1 - t0).count();
        r.test_seconds = std::chrono::duration<double>(t2 - t1).count();
        rep = make_report(opts, data, r, summarize(counters));
        break;
      }
      case Role::kServer0:
      case Role::kServer1: {
        Server server(role == Role::kServer0 ? 0 : 1, cfg, map);
        server.run();
        break;
      }
      case Role::kDealer: {
        Dealer dealer(cfg, map);
        dealer.run();
        break;
      }
    }
  } catch (...) {
    for (auto& [r, c] : owned) c->close();
    throw;
  }
  return rep;
}

// ---- audits ----

MaskAudit audit_mask_uniformity(uint64_t samples, uint64_t atm0, uint64_t atm1,
                                uint64_t seed, bool constant_mask) {
  FixedConfig fc;
  fc.bit_width = 8;
  fc.frac_bits = 4;
  MaskAudit out;
  out.atm[0] = atm0 & fc.mask();
  out.atm[1] = atm1 & fc.mask();
  std::vector<uint64_t> hist[2] = {std::vector<uint64_t>(256), std::vector<uint64_t>(256)};
  for (int v = 0; v < 2; ++v) {
    // Masks come from the dealer's stream, one ring element per draw, and are
    // applied with the ring addition the client uses.
    Prg rng = Prg::from_seed(seed, "dealer/audit/" + std::to_string(v));
    const uint64_t fixed_mask = rng.next_bits(8);
    FixedTensor atm({samples}, fc), alpha({samples}, fc);
    for (uint64_t i = 0; i < samples; ++i) {
      atm[i] = out.atm[v];
      alpha[i] = constant_mask ? fixed_mask : rng.next_bits(8);
    }
    const FixedTensor x_pub = tensor_add(atm, alpha);
    for (uint64_t i = 0; i < samples; ++i) ++hist[v][x_pub[i]];
    out.uniform[v] = chi_square_uniform(hist[v]);
  }
  out.two_sample = chi_square_two_sample(hist[0], hist[1]);
  return out;
}

LiaAudit audit_lia_game(uint64_t trials, size_t classes, uint64_t seed, size_t width) {
  if (classes == 0 || width == 0) throw InvalidConfig("classes and width must be positive");
  const FixedConfig fc;
  LayerSpec head;
  head.kind = LayerKind::kFC;
  head.placement = Placement::kClientOutput;
  head.out_features = classes;
  const LayerParams p = init_layer_params(head, {width}, 0, seed, fc);
  Prg rng = Prg::from_seed(seed, "audit/lia");
  Prg share_rng = Prg::from_seed(seed, "client/gradient-shares");

  auto guess = [](const FixedTensor& g) {
    size_t best = 0;
    uint64_t best_mag = 0;
    for (size_t c = 0; c < g.size(); ++c) {
      const int64_t v = g.signed_at(c);
      const uint64_t mag = v < 0 ? uint64_t(0) - uint64_t(v) : uint64_t(v);
      if (mag > best_mag) best = c, best_mag = mag;
    }
    return best;
  };

  uint64_t plain_hits = 0, share_hits = 0;
  for (uint64_t t = 0; t < trials; ++t) {
    const size_t label = rng.next_below(classes);
    FixedTensor x({1, width}, fc), y({1, classes}, fc);
    for (size_t i = 0; i < width; ++i) {
      x[i] = encode(static_cast<double>(rng.next_bits(16)) / 65536.0, fc).value();
    }
    y[label] = encode(1.0, fc).value();
    const FixedTensor logits = fc_plain_forward(x, p.w, p.b);
    const FixedTensor grad = mse_loss(logits, y).grad;
    plain_hits += guess(grad) == label;
    auto [g0, g1] = split(grad, share_rng);
    share_hits += guess(g0.value) == label;
  }
  LiaAudit out;
  out.trials = trials;
  out.classes = classes;
  if (trials == 0) return out;
  out.plain_accuracy = static_cast<double>(plain_hits) / trials;
  out.share_accuracy = static_cast<double>(share_hits) / trials;
  out.plain_std_error = binomial_std_error(out.plain_accuracy, trials);
  out.share_std_error = binomial_std_error(out.share_accuracy, trials);
  return out;
}

bool LabelAudit::passed(double alpha) const {
  if (label_hits != 0 || label_frames != 0) return false;
  for (const auto& [role, chi] : gradient_uniformity) {
    if (!(chi.p_value > alpha)) return false;
  }
  return true;
}

LabelAudit audit_label_confinement(const Wiretap& tap, const SessionConfig& cfg,
                                   const Dataset& train) {
  // Patterns: per training batch, the raw label bytes and the packed one-hot
  // targets. Indexed by their first 8 bytes so each frame is scanned once.
  const size_t B = cfg.train.batch_size;
  const size_t N = cfg.train.batches != 0 ? cfg.train.batches : train.size() / B;
  std::vector<std::vector<uint8_t>> patterns;
  for (size_t e = 0; e < cfg.train.epochs; ++e) {
    const std::vector<size_t> order = epoch_order(train.size(), cfg.train.seed, e);
    for (size_t i = 0; i < N; ++i) {
      const std::vector<size_t> rows(order.begin() + i * B, order.begin() + (i + 1) * B);
      std::vector<uint8_t> labels;
      for (size_t r : rows) labels.push_back(train.labels[r]);
      patterns.push_back(std::move(labels));
      patterns.push_back(pack_ring(train.batch_targets(rows).data(), cfg.fixed.bit_width));
    }
  }
  // Patterns under 8 bytes would match random payload bytes by chance and
  // are left out; the one-hot targets still cover those batches.
  std::unordered_multimap<uint64_t, size_t> index;
  for (size_t k = 0; k < patterns.size(); ++k) {
    if (patterns[k].size() < 8) continue;
    uint64_t key = 0;
    std::memcpy(&key, patterns[k].data(), 8);
    index.emplace(key, k);
  }

  if (index.empty()) throw InvalidConfig("batches too small for the label scan");

  LabelAudit out;
  std::map<Role, std::vector<uint64_t>> hist;
  const size_t eb = static_cast<size_t>(cfg.fixed.element_bytes());
  for (const TapRecord& rec : tap.records()) {
    ++out.frames;
    if (rec.header.kind == PayloadKind::kLabels) ++out.label_frames;
    const std::vector<uint8_t>& f = rec.frame;
    bool hit = false;
    for (size_t pos = MessageHeader::kSize; !hit && pos + 8 <= f.size(); ++pos) {
      uint64_t key = 0;
      std::memcpy(&key, f.data() + pos, 8);
      auto [lo, hi] = index.equal_range(key);
      for (auto it = lo; it != hi && !hit; ++it) {
        const std::vector<uint8_t>& p = patterns[it->second];
        hit = pos + p.size() <= f.size() &&
              std::equal(p.begin(), p.end(), f.begin() + static_cast<ptrdiff_t>(pos));
      }
    }
    out.label_hits += hit;
    if (rec.from == Role::kClient && rec.header.kind == PayloadKind::kGradient &&
        eb == 1) {
      std::vector<uint64_t>& h = hist[rec.to];
      h.resize(256);
      for (size_t i = MessageHeader::kSize; i < f.size(); ++i) ++h[f[i]];
    }
  }
  for (auto& [role, h] : hist) out.gradient_uniformity[role] = chi_square_uniform(h);
  return out;
}

}  // namespace splitfss
