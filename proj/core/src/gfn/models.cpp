#include "uqgfn/gfn/models.hpp"

#include "uqgfn/common/errors.hpp"
#include "uqgfn/nn/ops.hpp"

namespace uqgfn::gfn {

namespace {

std::vector<int> layer_dims(int input, const std::vector<int>& hidden, int output) {
  std::vector<int> dims{input};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(output);
  return dims;
}

HeadVars split_heads(nn::Var out, int actions, bool flow) {
  if (!flow) return {out, {}};
  return {nn::slice_rows(out, 0, actions), nn::slice_rows(out, actions, 1)};
}

HeadValues split_values(Matrix out, int actions, bool flow) {
  if (!flow) return {std::move(out), Matrix()};
  return {out.topRows(actions), out.bottomRows(1)};
}

}  // namespace

MlpGfnModel::MlpGfnModel(int input_dim, int num_actions, const std::vector<int>& hidden, bool flow_head, Rng& rng)
    : net_(layer_dims(input_dim, hidden, num_actions + (flow_head ? 1 : 0)), nn::Activation::kRelu,
           nn::Activation::kIdentity, rng),
      num_actions_(num_actions),
      flow_head_(flow_head) {
  if (num_actions < 1) throw UsageError("a policy needs at least one action");
}

HeadVars MlpGfnModel::heads(nn::Tape& tape, const Matrix& features) {
  return split_heads(net_.forward(tape, tape.constant(features)), num_actions_, flow_head_);
}

HeadValues MlpGfnModel::predict(const Matrix& features) const {
  return split_values(net_.forward(features), num_actions_, flow_head_);
}

std::vector<nn::Parameter*> MlpGfnModel::parameters() {
  auto p = net_.parameters();
  p.push_back(&log_z_);
  return p;
}

nlohmann::json MlpGfnModel::to_json() const {
  return {{"type", "mlp-gfn"},
          {"actions", num_actions_},
          {"flow_head", flow_head_},
          {"log_z", log_z_.value(0, 0)},
          {"net", net_.to_json()}};
}

MlpGfnModel MlpGfnModel::from_json(const nlohmann::json& doc) {
  if (doc.at("type") != "mlp-gfn") throw UsageError("not an mlp-gfn checkpoint");
  MlpGfnModel m;
  m.net_ = nn::DenseNet::from_json(doc.at("net"));
  m.num_actions_ = doc.at("actions").get<int>();
  m.flow_head_ = doc.at("flow_head").get<bool>();
  m.log_z_ = nn::Parameter(Matrix::Constant(1, 1, doc.at("log_z").get<double>()));
  if (m.net_.output_dim() != m.num_actions_ + (m.flow_head_ ? 1 : 0))
    throw UsageError("mlp-gfn checkpoint: output size does not match the action count");
  return m;
}

RecurrentGfnModel::RecurrentGfnModel(int vocab_size, int embed_dim, int hidden_dim,
                                     const std::vector<int>& head_hidden, int num_actions, bool flow_head, Rng& rng)
    : encoder_(vocab_size, embed_dim, hidden_dim, rng),
      head_(layer_dims(hidden_dim, head_hidden, num_actions + (flow_head ? 1 : 0)), nn::Activation::kRelu,
            nn::Activation::kIdentity, rng),
      num_actions_(num_actions),
      flow_head_(flow_head) {
  if (num_actions < 1) throw UsageError("a policy needs at least one action");
}

HeadVars RecurrentGfnModel::heads(nn::Tape& tape, std::span<const std::vector<int>> sequences) {
  return split_heads(head_.forward(tape, encoder_.encode_batch(tape, sequences)), num_actions_, flow_head_);
}

HeadValues RecurrentGfnModel::predict(std::span<const std::vector<int>> sequences) const {
  return split_values(head_.forward(encoder_.encode_batch(sequences)), num_actions_, flow_head_);
}

std::vector<nn::Parameter*> RecurrentGfnModel::network_parameters() {
  auto p = encoder_.parameters();
  for (auto* q : head_.parameters()) p.push_back(q);
  return p;
}

std::vector<nn::Parameter*> RecurrentGfnModel::parameters() {
  auto p = network_parameters();
  p.push_back(&log_z_);
  return p;
}

nlohmann::json RecurrentGfnModel::to_json() const {
  return {{"type", "recurrent-gfn"},
          {"actions", num_actions_},
          {"flow_head", flow_head_},
          {"log_z", log_z_.value(0, 0)},
          {"encoder", encoder_.to_json()},
          {"head", head_.to_json()}};
}

RecurrentGfnModel RecurrentGfnModel::from_json(const nlohmann::json& doc) {
  if (doc.at("type") != "recurrent-gfn") throw UsageError("not a recurrent-gfn checkpoint");
  RecurrentGfnModel m;
  m.encoder_ = nn::RecurrentEncoder::from_json(doc.at("encoder"));
  m.head_ = nn::DenseNet::from_json(doc.at("head"));
  m.num_actions_ = doc.at("actions").get<int>();
  m.flow_head_ = doc.at("flow_head").get<bool>();
  m.log_z_ = nn::Parameter(Matrix::Constant(1, 1, doc.at("log_z").get<double>()));
  return m;
}

}  // namespace uqgfn::gfn
