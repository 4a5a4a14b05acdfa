#pragma once

// Desk-scale configuration: a 2+2-layer, 64-wide model that trains on the
// default synthetic corpus in well under a minute on one CPU core. The
// library-wide defaults in ModelConfig/TrainConfig describe the full-size
// setting instead.

#include "xf2t/model.hpp"
#include "xf2t/trainer.hpp"

namespace xf2t {

inline ModelConfig desk_model_config(size_t vocab_size, uint64_t seed = 0) {
  ModelConfig c;
  c.vocab_size = vocab_size;
  c.d_model = 64;
  c.n_heads = 4;
  c.n_enc_layers = 2;
  c.n_dec_layers = 2;
  c.d_ff = 256;
  c.dropout_rate = 0.1;
  c.max_positions = 128;
  c.seed = seed;
  return c;
}

inline TrainConfig desk_train_config(uint64_t seed = 0) {
  TrainConfig c;
  c.learning_rate = 1e-3;
  c.weight_decay = 0.01;
  c.batch_size = 4;
  c.dropout = 0.1;
  c.epochs_finetune = 30;
  c.epochs_pretrain = 7;
  c.seed = seed;
  return c;
}

}  // namespace xf2t
