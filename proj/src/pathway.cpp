#include "hubpath/pathway.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "hubpath/error.hpp"

namespace hubpath {

// ---- generator -----------------------------------------------------------

Generator::Generator(std::size_t input_dim, std::size_t experts, std::uint64_t seed,
                     std::vector<std::size_t> trunk_widths)
    : input_dim_(input_dim),
      experts_(experts),
      trunk_widths_(std::move(trunk_widths)),
      noise_(derive_seed(seed, seed_role::noise)) {
  if (input_dim == 0 || experts == 0) throw UsageError("generator needs positive input dim and expert count");
  if (trunk_widths_.empty()) throw UsageError("generator trunk needs at least one layer");
  Rng rng(seed);
  std::size_t fan_in = input_dim;
  for (std::size_t i = 0; i < trunk_widths_.size(); ++i) {
    trunk.push_back(make_affine("generator.trunk" + std::to_string(i), ParamGroup::generator, fan_in,
                                trunk_widths_[i], rng));
    fan_in = trunk_widths_[i];
  }
  preference = make_affine("generator.gp", ParamGroup::generator, fan_in, experts, rng);
  noise = make_affine("generator.gn", ParamGroup::generator, fan_in, experts, rng);
}

Generator::Output Generator::generate(Tape& tape, Var x, const Tensor* epsilon) {
  const Tensor& in = x.value();
  if (in.rank() != 2 || in.shape()[1] != input_dim_)
    throw ShapeError("generator expects [B," + std::to_string(input_dim_) + "] input, got " +
                     shape_string(in.shape()));
  const std::size_t batch = in.shape()[0];
  Var h = x;
  for (auto& layer : trunk) h = relu(affine(h, tape.param(layer.weight), tape.param(layer.bias)));
  Var gp = affine(h, tape.param(preference.weight), tape.param(preference.bias));
  const std::uint64_t noise_head_macs = trunk_widths_.back() * experts_;
  counter_.add_macs(batch * (macs_per_sample() - (mode_ == GateMode::eval ? noise_head_macs : 0)));
  if (!gp.value().all_finite()) throw NumericError("generator preference head produced a non-finite value");

  Output out{Var{}, Tensor({batch, experts_})};
  if (mode_ == GateMode::eval) {
    out.dense = softmax(gp);
    return out;
  }
  Var gn = affine(h, tape.param(noise.weight), tape.param(noise.bias));
  if (!gn.value().all_finite()) throw NumericError("generator noise head produced a non-finite value");
  if (epsilon) {
    if (epsilon->shape() != out.epsilon.shape())
      throw ShapeError("replayed noise " + shape_string(epsilon->shape()) + " does not match " +
                       shape_string(out.epsilon.shape()));
    out.epsilon = *epsilon;
  } else {
    for (auto& v : out.epsilon.data()) v = noise_.normal();
  }
  out.dense = softmax(add(gp, mul_const(softplus(gn), out.epsilon)));
  return out;
}

std::vector<Parameter*> Generator::parameters() {
  std::vector<Parameter*> out;
  for (auto& layer : trunk) {
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
  }
  for (auto* l : {&preference, &noise}) {
    out.push_back(&l->weight);
    out.push_back(&l->bias);
  }
  return out;
}

std::vector<const Parameter*> Generator::parameters() const {
  std::vector<const Parameter*> out;
  for (auto* p : const_cast<Generator*>(this)->parameters()) out.push_back(p);
  return out;
}

std::size_t Generator::parameter_count() const {
  std::size_t n = 0;
  for (const auto* p : parameters()) n += p->size();
  return n;
}

std::uint64_t Generator::macs_per_sample() const {
  std::uint64_t macs = 0;
  std::size_t fan_in = input_dim_;
  for (auto w : trunk_widths_) {
    macs += fan_in * w;
    fan_in = w;
  }
  return macs + 2 * fan_in * experts_;
}

// ---- top-k ---------------------------------------------------------------

Tensor PathwayWeights::mask() const {
  Tensor m(dense.shape());
  for (std::size_t i = 0; i < sparse.size(); ++i) m[i] = sparse[i] > 0.0 ? 1.0 : 0.0;
  return m;
}

std::vector<std::vector<std::size_t>> PathwayWeights::routes() const {
  std::vector<std::vector<std::size_t>> rows(experts());
  for (std::size_t b = 0; b < batch(); ++b)
    for (std::size_t i = 0; i < experts(); ++i)
      if (sparse.at(b, i) > 0.0) rows[i].push_back(b);
  return rows;
}

PathwayWeights topk_filter(const Tensor& dense, std::size_t k) {
  if (k < 1) throw UsageError("top-k needs k >= 1");
  if (dense.rank() != 2) throw ShapeError("top-k expects [B,m] weights, got " + shape_string(dense.shape()));
  const std::size_t batch = dense.shape()[0], m = dense.shape()[1];
  const std::size_t keep = std::min(k, m);
  PathwayWeights pw{dense, Tensor(dense.shape()), {}, k};
  pw.active.resize(batch);
  std::vector<std::size_t> order(m);
  for (std::size_t b = 0; b < batch; ++b) {
    auto row = dense.row(b);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t c) { return row[a] > row[c]; });
    auto& act = pw.active[b];
    act.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep));
    std::sort(act.begin(), act.end());
    for (auto i : act) pw.sparse.at(b, i) = row[i];
  }
  return pw;
}

// ---- aggregator ----------------------------------------------------------

Aggregator::Aggregator(std::size_t experts, std::size_t classes, std::uint64_t seed)
    : experts_(experts), classes_(classes) {
  if (experts == 0 || classes == 0) throw UsageError("aggregator needs positive expert and class counts");
  Rng rng(seed);
  const std::size_t width = experts * classes;
  skip = make_affine("aggregator.skip", ParamGroup::aggregator, width, classes, rng);
  hidden = make_affine("aggregator.hidden", ParamGroup::aggregator, width, classes, rng);
  out = make_affine("aggregator.out", ParamGroup::aggregator, classes, classes, rng);
  reset_to_block_sum();
}

void Aggregator::reset_to_block_sum() {
  auto& ws = skip.weight.tensor;
  std::fill(ws.data().begin(), ws.data().end(), 0.0);
  for (std::size_t i = 0; i < experts_; ++i)
    for (std::size_t c = 0; c < classes_; ++c) ws.at(i * classes_ + c, c) = 1.0;
  std::fill(skip.bias.tensor.data().begin(), skip.bias.tensor.data().end(), 0.0);
  std::fill(out.weight.tensor.data().begin(), out.weight.tensor.data().end(), 0.0);
  std::fill(out.bias.tensor.data().begin(), out.bias.tensor.data().end(), 0.0);
}

Var Aggregator::forward(Tape& tape, Var z) {
  const Tensor& in = z.value();
  if (in.rank() != 2 || in.shape()[1] != experts_ * classes_)
    throw ShapeError("aggregator expects [B," + std::to_string(experts_ * classes_) + "] input, got " +
                     shape_string(in.shape()));
  Var direct = affine(z, tape.param(skip.weight), tape.param(skip.bias));
  Var h = relu(affine(z, tape.param(hidden.weight), tape.param(hidden.bias)));
  Var mixed = affine(h, tape.param(out.weight), tape.param(out.bias));
  counter_.add_macs(in.shape()[0] * macs_per_sample());
  return add(direct, mixed);
}

std::vector<Parameter*> Aggregator::parameters() {
  return {&skip.weight, &skip.bias, &hidden.weight, &hidden.bias, &out.weight, &out.bias};
}

std::vector<const Parameter*> Aggregator::parameters() const {
  return {&skip.weight, &skip.bias, &hidden.weight, &hidden.bias, &out.weight, &out.bias};
}

std::size_t Aggregator::parameter_count() const {
  std::size_t n = 0;
  for (const auto* p : parameters()) n += p->size();
  return n;
}

std::uint64_t Aggregator::macs_per_sample() const {
  return 2 * experts_ * classes_ * classes_ + classes_ * classes_;
}

// ---- routing -------------------------------------------------------------

RoutedOutput route_and_aggregate(Tape& tape, Hub& hub, Aggregator& agg, const PathwayWeights& pw, Var sparse,
                                 Var x) {
  const std::size_t m = hub.size();
  if (pw.experts() != m || agg.experts() != m)
    throw ShapeError("pathway weights cover " + std::to_string(pw.experts()) + " experts, aggregator " +
                     std::to_string(agg.experts()) + ", hub has " + std::to_string(m));
  if (sparse.value().shape() != pw.dense.shape())
    throw ShapeError("sparse weights " + shape_string(sparse.value().shape()) + " do not match pathway weights " +
                     shape_string(pw.dense.shape()));
  if (x.value().rows() != pw.batch())
    throw ShapeError("input has " + std::to_string(x.value().rows()) + " rows, pathway weights " +
                     std::to_string(pw.batch()));

  RoutedOutput out;
  out.routes = pw.routes();
  out.expert_logits.resize(m);
  const std::size_t classes = agg.classes();
  for (std::size_t i = 0; i < m; ++i) {
    if (out.routes[i].empty()) continue;
    if (hub[i].arch.head_width() != classes)
      throw ShapeError("expert " + std::to_string(i) + " emits " + std::to_string(hub[i].arch.head_width()) +
                       " logits, aggregator expects " + std::to_string(classes));
    Var xi = out.routes[i].size() == pw.batch() ? x : gather_rows(x, out.routes[i]);
    out.expert_logits[i] = hub[i].forward(tape, xi);
  }
  Var z = route_combine(out.expert_logits, out.routes, sparse, classes);
  out.logits = agg.forward(tape, z);
  return out;
}

Prediction predict(Generator& gen, Hub& hub, Aggregator& agg, const Tensor& x, std::size_t k) {
  Tape tape;
  Var xv = tape.constant(x);
  auto g = gen.generate(tape, xv);
  PathwayWeights pw = topk_filter(g.dense.value(), k);
  Var sparse = mul_const(g.dense, pw.mask());
  auto routed = route_and_aggregate(tape, hub, agg, pw, sparse, xv);
  return Prediction{routed.logits.value(), std::move(pw)};
}

void write_weights_header(std::ostream& out, std::size_t experts) {
  out << "sample_index";
  for (std::size_t i = 1; i <= experts; ++i) out << ",w_" << i;
  out << ",active_set\n";
}

void write_weights_rows(std::ostream& out, const PathwayWeights& pw, std::size_t first_index) {
  char buf[32];
  for (std::size_t b = 0; b < pw.batch(); ++b) {
    out << first_index + b;
    for (double w : pw.dense.row(b)) {
      std::snprintf(buf, sizeof buf, "%.17g", w);
      out << ',' << buf;
    }
    out << ',';
    for (std::size_t j = 0; j < pw.active[b].size(); ++j) out << (j ? ";" : "") << pw.active[b][j] + 1;
    out << '\n';
  }
}

}  // namespace hubpath
