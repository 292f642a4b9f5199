// Copyright 2026 The nwf authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#include "nwf/training.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <utility>

#include "nwf/adam.hpp"
#include "nwf/common.hpp"
#include "nwf/io.hpp"
#include "nwf/tape.hpp"

namespace nwf {

MixtureSampler::MixtureSampler(std::vector<SeqExample> baseline,
                               std::vector<SeqExample> adaptation,
                               double upsample, uint64_t seed)
    : baseline_(std::move(baseline)),
      adaptation_(std::move(adaptation)),
      upsample_(upsample),
      rng_(seed) {
  NWF_REQUIRE(!baseline_.empty(), "MixtureSampler: empty baseline pool");
  NWF_REQUIRE(upsample_ >= 1.0, "MixtureSampler: upsample must be >= 1");
}

const SeqExample& MixtureSampler::sample() {
  const double adapt_weight = upsample_ * double(adaptation_.size());
  const double total = adapt_weight + double(baseline_.size());
  if (adapt_weight > 0 && rng_.uniform() * total < adapt_weight) {
    return adaptation_[size_t(
        rng_.uniform_int(0, int(adaptation_.size()) - 1))];
  }
  return baseline_[size_t(rng_.uniform_int(0, int(baseline_.size()) - 1))];
}

double MixtureSampler::adaptation_fraction() const {
  const double adapt_weight = upsample_ * double(adaptation_.size());
  return adapt_weight / (adapt_weight + double(baseline_.size()));
}

MixtureSampler make_mixture(std::vector<SeqExample> baseline,
                            std::vector<SeqExample> adaptation,
                            double upsample, uint64_t seed) {
  return MixtureSampler(std::move(baseline), std::move(adaptation), upsample,
                        seed);
}

void TrainConfig::validate() const {
  NWF_REQUIRE(lr > 0, "TrainConfig: lr must be positive");
  NWF_REQUIRE(batch_size >= 1, "TrainConfig: batch_size must be >= 1");
  NWF_REQUIRE(eval_interval >= 1, "TrainConfig: eval_interval must be >= 1");
  NWF_REQUIRE(patience >= 1, "TrainConfig: patience must be >= 1");
  NWF_REQUIRE(max_steps >= 0, "TrainConfig: max_steps must be >= 0");
}

void write_step_log(const std::string& path,
                    const std::vector<StepLogRow>& log) {
  std::ostringstream out;
  out.precision(17);
  out << "step,train_loss,dev_ppl\n";
  for (const auto& row : log) {
    out << row.step << "," << row.train_loss << "," << row.dev_ppl << "\n";
  }
  write_text_file(path, out.str());
}

namespace {

// One training example inside a batch. record = false contributes loss but
// no gradient (used when the loss is constant in the trainable parameters).
struct BatchItem {
  const SeqExample* ex = nullptr;
  const MemoryList* memory = nullptr;
  bool record = true;
};

Value example_loss(Tape& tape, const Model& model, const AdapterSet* adapters,
                   const MemoryList* memory, const SeqExample& ex) {
  Value enc = model.encode_source(tape, ex.src, adapters);
  std::vector<int> prefix;
  prefix.reserve(ex.tgt.size() + 1);
  prefix.push_back(Vocab::kBos);
  prefix.insert(prefix.end(), ex.tgt.begin(), ex.tgt.end());
  std::vector<int> labels = ex.tgt;
  labels.push_back(Vocab::kEos);
  Value logits = model.decode_logits(tape, prefix, enc, adapters);
  if (memory != nullptr && !memory->empty()) {
    EncodedMemory em = model.encode_memory(tape, *memory);
    Value mem_logits = model.memory_decode_logits(tape, prefix, enc, em);
    logits = Model::combine_logits(logits, &mem_logits);
  }
  return cross_entropy_sum(logits, labels);
}

// Accumulates (1 / batch tokens) * sum of per-example gradients into the
// trainable parameters and returns the batch mean per-token NLL.
double batch_backward(const Model& model, const AdapterSet* adapters,
                      const std::vector<BatchItem>& batch) {
  int64_t batch_tokens = 0;
  for (const auto& item : batch) {
    batch_tokens += int64_t(item.ex->tgt.size()) + 1;
  }
  const real_t scale = real_t(1.0 / double(batch_tokens));
  double total = 0;
  for (const auto& item : batch) {
    Tape tape(item.record);
    Value loss = example_loss(tape, model, adapters, item.memory, *item.ex);
    const double l = double(loss.val().data[0]);
    if (!std::isfinite(l)) {
      throw NumericError("training diverged: non-finite example loss");
    }
    total += l;
    if (item.record) {
      tape.backward(loss);
      tape.accumulate_param_grads(scale);
    }
  }
  return total / double(batch_tokens);
}

std::vector<Tensor> snapshot_values(const std::vector<Parameter*>& params) {
  std::vector<Tensor> snap;
  snap.reserve(params.size());
  for (const Parameter* p : params) snap.push_back(p->value);
  return snap;
}

void restore_values(const std::vector<Parameter*>& params,
                    const std::vector<Tensor>& snap) {
  NWF_REQUIRE(params.size() == snap.size(), "restore: size mismatch");
  for (size_t i = 0; i < params.size(); ++i) params[i]->value = snap[i];
}

// Shared stage driver: Adam on `tracked`, dev evaluation at step 0 and every
// eval_interval steps, best-checkpoint tracking with early stopping after
// `patience` consecutive non-improving evals, restore of the best values.
TrainResult run_stage(const TrainConfig& cfg, uint64_t seed,
                      const std::vector<Parameter*>& tracked,
                      const std::function<double(Rng&)>& train_batch,
                      const std::function<double()>& dev_ppl) {
  cfg.validate();
  NWF_REQUIRE(!tracked.empty(), "training stage: no trainable parameters");
  Rng rng(seed);
  for (Parameter* p : tracked) p->zero_grad();

  TrainResult res;
  double ppl0 = dev_ppl();
  if (!std::isfinite(ppl0)) {
    throw NumericError("training diverged: non-finite dev perplexity");
  }
  res.log.push_back({0, std::numeric_limits<double>::quiet_NaN(), ppl0});
  res.best_dev_ppl = ppl0;
  res.best_step = 0;
  std::vector<Tensor> best = snapshot_values(tracked);

  AdamConfig acfg;
  acfg.lr = cfg.lr;
  AdamState opt(acfg, tracked);

  int bad_evals = 0;
  double acc_loss = 0;
  int acc_batches = 0;
  for (int step = 1; step <= cfg.max_steps; ++step) {
    const double loss = train_batch(rng);
    if (!std::isfinite(loss)) {
      throw NumericError("training diverged: non-finite batch loss");
    }
    opt.step();
    acc_loss += loss;
    ++acc_batches;
    res.steps_run = step;
    if (step % cfg.eval_interval != 0) continue;

    const double ppl = dev_ppl();
    if (!std::isfinite(ppl)) {
      throw NumericError("training diverged: non-finite dev perplexity");
    }
    res.log.push_back({step, acc_loss / double(acc_batches), ppl});
    acc_loss = 0;
    acc_batches = 0;
    if (ppl < res.best_dev_ppl) {
      res.best_dev_ppl = ppl;
      res.best_step = step;
      best = snapshot_values(tracked);
      bad_evals = 0;
    } else if (++bad_evals >= cfg.patience) {
      break;
    }
  }
  restore_values(tracked, best);
  return res;
}

}  // namespace

TrainResult pretrain_baseline(Model& model,
                              const std::vector<SeqExample>& train,
                              const std::vector<SeqExample>& dev,
                              const TrainConfig& cfg, uint64_t seed) {
  NWF_REQUIRE(!train.empty(), "pretrain_baseline: empty train set");
  NWF_REQUIRE(!dev.empty(), "pretrain_baseline: empty dev set");
  model.set_base_trainable(true);
  model.set_memory_trainable(false);
  std::vector<Parameter*> tracked = model.base_params();

  auto train_batch = [&](Rng& rng) {
    std::vector<BatchItem> batch(size_t(cfg.batch_size));
    for (auto& item : batch) {
      item.ex = &train[size_t(rng.uniform_int(0, int(train.size()) - 1))];
    }
    return batch_backward(model, nullptr, batch);
  };
  auto dev_eval = [&] {
    return sequence_perplexity(model, nullptr, nullptr, dev);
  };
  return run_stage(cfg, seed, tracked, train_batch, dev_eval);
}

void MemoryPolicy::validate() const {
  NWF_REQUIRE(memory_prob >= 0 && memory_prob <= 1,
              "MemoryPolicy: memory_prob must be in [0, 1]");
  NWF_REQUIRE(min_own >= 1, "MemoryPolicy: min_own must be >= 1");
  NWF_REQUIRE(max_own >= min_own, "MemoryPolicy: max_own < min_own");
  NWF_REQUIRE(max_distractors >= 0,
              "MemoryPolicy: max_distractors must be >= 0");
}

MemoryList sample_policy_memory(const MemoryPolicy& policy,
                                const Utterance& utt,
                                const std::vector<std::string>& distractors,
                                const Vocab& char_vocab, Rng& rng) {
  policy.validate();
  if (rng.uniform() >= policy.memory_prob) return MemoryList{};

  std::vector<std::string> own;
  for (const auto& w : utt.words) {
    if (std::find(own.begin(), own.end(), w) == own.end()) own.push_back(w);
  }
  if (own.empty()) return MemoryList{};

  const int lo = std::min(policy.min_own, int(own.size()));
  const int hi = std::min(policy.max_own, int(own.size()));
  const int n_own = int(rng.uniform_int(lo, hi));
  std::vector<std::string> words;
  for (size_t idx : rng.sample_indices(own.size(), size_t(n_own))) {
    words.push_back(own[idx]);
  }
  if (!distractors.empty()) {
    const int n_dis = int(rng.uniform_int(0, policy.max_distractors));
    for (int i = 0; i < n_dis; ++i) words.push_back(rng.choice(distractors));
  }
  rng.shuffle(words);
  return MemoryList::from_words(words, char_vocab);
}

TrainResult train_memory_branch(Model& model,
                                const std::vector<Utterance>& train,
                                const std::vector<Utterance>& dev,
                                const std::vector<std::string>& distractors,
                                const Vocab& phoneme_vocab,
                                const Vocab& char_vocab,
                                const MemoryPolicy& policy,
                                const TrainConfig& cfg, uint64_t seed) {
  NWF_REQUIRE(!train.empty(), "train_memory_branch: empty train set");
  NWF_REQUIRE(!dev.empty(), "train_memory_branch: empty dev set");
  policy.validate();
  model.set_base_trainable(false);
  model.set_memory_trainable(true);
  std::vector<Parameter*> tracked = model.memory_params();

  std::vector<SeqExample> train_ex;
  train_ex.reserve(train.size());
  for (const auto& u : train) {
    train_ex.push_back(to_example(u, phoneme_vocab, char_vocab));
  }
  std::vector<SeqExample> dev_ex;
  dev_ex.reserve(dev.size());
  for (const auto& u : dev) {
    dev_ex.push_back(to_example(u, phoneme_vocab, char_vocab));
  }

  // One fixed memory draw per dev utterance keeps the selection metric
  // comparable across evaluations.
  Rng mem_rng(derive_seed(seed, "memdev"));
  std::vector<MemoryList> dev_mem;
  dev_mem.reserve(dev.size());
  for (const auto& u : dev) {
    dev_mem.push_back(
        sample_policy_memory(policy, u, distractors, char_vocab, mem_rng));
  }

  auto train_batch = [&](Rng& rng) {
    std::vector<MemoryList> mems;
    mems.reserve(size_t(cfg.batch_size));
    std::vector<BatchItem> batch(size_t(cfg.batch_size));
    for (auto& item : batch) {
      const int idx = int(rng.uniform_int(0, int(train.size()) - 1));
      mems.push_back(sample_policy_memory(policy, train[size_t(idx)],
                                          distractors, char_vocab, rng));
      item.ex = &train_ex[size_t(idx)];
      item.memory = &mems.back();
      item.record = !mems.back().empty();
    }
    return batch_backward(model, nullptr, batch);
  };
  auto dev_eval = [&] {
    double total = 0;
    int64_t tokens = 0;
    for (size_t i = 0; i < dev_ex.size(); ++i) {
      const MemoryList* m = dev_mem[i].empty() ? nullptr : &dev_mem[i];
      auto [t, k] = sequence_nll(model, nullptr, m, {dev_ex[i]});
      total += t;
      tokens += k;
    }
    return std::exp(total / double(tokens));
  };
  return run_stage(cfg, seed, tracked, train_batch, dev_eval);
}

TrainResult train_adapters(Model& model, AdapterSet& adapters,
                           MixtureSampler& mixture,
                           const std::vector<SeqExample>& validation,
                           const TrainConfig& cfg, uint64_t seed) {
  NWF_REQUIRE(!validation.empty(), "train_adapters: empty validation set");
  NWF_REQUIRE(!adapters.merged(), "train_adapters: adapters are merged");
  model.set_base_trainable(false);
  model.set_memory_trainable(false);
  std::vector<Parameter*> tracked = adapters.trainable_params();

  auto train_batch = [&](Rng&) {
    std::vector<BatchItem> batch(size_t(cfg.batch_size));
    for (auto& item : batch) item.ex = &mixture.sample();
    return batch_backward(model, &adapters, batch);
  };
  auto dev_eval = [&] {
    return sequence_perplexity(model, &adapters, nullptr, validation);
  };
  return run_stage(cfg, seed, tracked, train_batch, dev_eval);
}

}  // namespace nwf
