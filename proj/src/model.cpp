#include "evlab/model.hpp"

#include <cmath>
#include <cstring>
#include <set>
#include <utility>

#include "evlab/ops.hpp"

namespace evlab {

const char* loss_name(LossKind k) { return k == LossKind::Bce ? "bce" : "mse"; }

LossKind parse_loss(const std::string& name) {
  if (name == "bce") return LossKind::Bce;
  if (name == "mse") return LossKind::Mse;
  throw ValidationError("unknown loss '" + name + "', expected bce or mse");
}

std::size_t ModelConfig::channels(std::size_t i) const {
  const double scaled = std::floor(static_cast<double>(base_channels.at(i)) * width_mult + 0.5);
  return scaled < 1.0 ? 1 : static_cast<std::size_t>(scaled);
}

std::size_t ModelConfig::fc_units() const {
  const double scaled = std::floor(static_cast<double>(fc_hidden) * width_mult + 0.5);
  return scaled < 1.0 ? 1 : static_cast<std::size_t>(scaled);
}

void ModelConfig::validate() const {
  if (base_channels.size() != 3)
    throw ValidationError("model config: expected 3 base channels, got " +
                          std::to_string(base_channels.size()));
  for (auto c : base_channels)
    if (c == 0) throw ValidationError("model config: base channel must be positive");
  if (input_size == 0 || input_size % 8 != 0)
    throw ValidationError("model config: input_size must be a positive multiple of 8, got " +
                          std::to_string(input_size));
  if (!(width_mult > 0.0) || !std::isfinite(width_mult))
    throw ValidationError("model config: width_mult must be positive and finite");
  if (fc_hidden == 0) throw ValidationError("model config: fc_hidden must be positive");
}

NamedTensor* ParameterSet::find(const std::string& name) {
  for (auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

const NamedTensor* ParameterSet::find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

Tensor& ParameterSet::at(const std::string& name) {
  if (auto* t = find(name)) return t->tensor;
  throw ValidationError("model: missing tensor " + name);
}

const Tensor& ParameterSet::at(const std::string& name) const {
  if (const auto* t = find(name)) return t->tensor;
  throw ValidationError("model: missing tensor " + name);
}

bool ParameterSet::has_classifier_head() const { return find("clf.fc1.w") != nullptr; }

void ParameterSet::zero_grads() {
  for (auto& t : tensors)
    if (!t.frozen) {
      t.tensor.alloc_grad();
      t.tensor.zero_grad();
    }
}

std::size_t param_count(const ParameterSet& ps, bool trainable_only) {
  std::size_t total = 0;
  for (const auto& t : ps.tensors)
    if (!trainable_only || !t.frozen) total += t.tensor.numel();
  return total;
}

// ---------------------------------------------------------------------------
// layer plans
// ---------------------------------------------------------------------------

std::vector<LayerDesc> encoder_layers() {
  std::vector<LayerDesc> v;
  for (int b = 1; b <= 3; ++b) {
    v.push_back({LayerOp::Conv, "enc.conv" + std::to_string(b)});
    v.push_back({LayerOp::Relu, ""});
    v.push_back({LayerOp::MaxPool, ""});
  }
  return v;
}

std::vector<LayerDesc> decoder_layers() {
  std::vector<LayerDesc> v;
  for (int b = 1; b <= 3; ++b) {
    v.push_back({LayerOp::Conv, "dec.conv" + std::to_string(b)});
    v.push_back({LayerOp::Relu, ""});
    v.push_back({LayerOp::Upsample, ""});
  }
  v.push_back({LayerOp::Conv, "dec.conv4"});
  v.push_back({LayerOp::Sigmoid, ""});
  return v;
}

std::vector<LayerDesc> autoencoder_layers() {
  auto v = encoder_layers();
  auto dec = decoder_layers();
  v.insert(v.end(), dec.begin(), dec.end());
  return v;
}

std::vector<LayerDesc> classifier_head_layers() {
  return {{LayerOp::Fc, "clf.fc1"},
          {LayerOp::Relu, ""},
          {LayerOp::Fc, "clf.fc2"},
          {LayerOp::Sigmoid, ""}};
}

std::vector<LayerDesc> classifier_layers() {
  auto v = encoder_layers();
  v.push_back({LayerOp::Flatten, ""});
  auto head = classifier_head_layers();
  v.insert(v.end(), head.begin(), head.end());
  return v;
}

// ---------------------------------------------------------------------------
// executor
// ---------------------------------------------------------------------------

Tensor run_layers(const ParameterSet& ps, std::span<const LayerDesc> layers,
                  const Tensor& input, Trace* trace) {
  if (trace) {
    trace->acts.clear();
    trace->pool_argmax.clear();
    trace->acts.reserve(layers.size());
    trace->pool_argmax.resize(layers.size());
  }
  Tensor local;
  const Tensor* cur = &input;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& layer = layers[i];
    Tensor out;
    std::vector<std::uint8_t> argmax;
    switch (layer.op) {
      case LayerOp::Conv:
        out = ops::conv2d_fwd(*cur, ps.at(layer.param + ".w"), ps.at(layer.param + ".b"));
        break;
      case LayerOp::Relu:
        out = ops::relu_fwd(*cur);
        break;
      case LayerOp::MaxPool: {
        auto [o, a] = ops::maxpool2_fwd(*cur);
        out = std::move(o);
        argmax = std::move(a);
        break;
      }
      case LayerOp::Upsample:
        out = ops::upsample2_fwd(*cur);
        break;
      case LayerOp::Sigmoid:
        out = ops::sigmoid_fwd(*cur);
        break;
      case LayerOp::Flatten: {
        if (cur->rank() != 4)
          throw ValidationError("flatten: expected 4D input, got " + shape_str(cur->shape));
        out = *cur;
        out.grad.clear();
        out.shape = {cur->dim(0), cur->numel() / cur->dim(0)};
        break;
      }
      case LayerOp::Fc:
        out = ops::fc_fwd(*cur, ps.at(layer.param + ".w"), ps.at(layer.param + ".b"));
        break;
    }
    if (trace) {
      trace->pool_argmax[i] = std::move(argmax);
      trace->acts.push_back(std::move(out));
      cur = &trace->acts.back();
    } else {
      local = std::move(out);
      cur = &local;
    }
  }
  return *cur;
}

namespace {

void accumulate_grad(NamedTensor& nt, const Tensor& g) {
  nt.tensor.alloc_grad();
  for (std::size_t i = 0; i < g.numel(); ++i) nt.tensor.grad[i] += g.data[i];
}

}  // namespace

void backward_layers(ParameterSet& ps, std::span<const LayerDesc> layers, const Trace& trace,
                     const Tensor& input, const Tensor& grad_out) {
  if (trace.acts.size() != layers.size())
    throw ValidationError("backward: trace does not cover the layer list");

  // Lowest layer index that still owns a trainable parameter. Everything
  // below it only exists to feed frozen layers and can be skipped.
  std::size_t stop = layers.size();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].param.empty()) continue;
    const auto* w = ps.find(layers[i].param + ".w");
    if (w && !w->frozen) {
      stop = i;
      break;
    }
  }
  if (stop == layers.size()) return;

  Tensor grad = grad_out;
  for (std::size_t idx = layers.size(); idx-- > stop;) {
    const auto& layer = layers[idx];
    const Tensor& layer_in = idx == 0 ? input : trace.acts[idx - 1];
    const bool need_input_grad = idx > stop;
    switch (layer.op) {
      case LayerOp::Conv: {
        auto g = ops::conv2d_bwd(grad, layer_in, ps.at(layer.param + ".w"));
        auto* w = ps.find(layer.param + ".w");
        auto* b = ps.find(layer.param + ".b");
        if (!w->frozen) accumulate_grad(*w, g.weight);
        if (!b->frozen) accumulate_grad(*b, g.bias);
        grad = std::move(g.input);
        break;
      }
      case LayerOp::Relu:
        grad = ops::relu_bwd(grad, layer_in);
        break;
      case LayerOp::MaxPool:
        grad = ops::maxpool2_bwd(grad, trace.pool_argmax[idx]);
        break;
      case LayerOp::Upsample:
        grad = ops::upsample2_bwd(grad);
        break;
      case LayerOp::Sigmoid:
        grad = ops::sigmoid_bwd(grad, trace.acts[idx]);
        break;
      case LayerOp::Flatten:
        grad.shape = layer_in.shape;
        break;
      case LayerOp::Fc: {
        auto g = ops::fc_bwd(grad, layer_in, ps.at(layer.param + ".w"), need_input_grad);
        auto* w = ps.find(layer.param + ".w");
        auto* b = ps.find(layer.param + ".b");
        if (!w->frozen) accumulate_grad(*w, g.weight);
        if (!b->frozen) accumulate_grad(*b, g.bias);
        if (need_input_grad) grad = std::move(g.input);
        break;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// construction
// ---------------------------------------------------------------------------

namespace {

Tensor kaiming_uniform(Rng& rng, std::vector<std::size_t> shape, std::size_t fan_in) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  Tensor t(std::move(shape));
  for (auto& v : t.data) v = static_cast<float>(rng.uniform(-bound, bound));
  return t;
}

void push_conv(std::vector<NamedTensor>& out, Rng& rng, const std::string& name,
               std::size_t cout, std::size_t cin) {
  out.push_back({name + ".w", kaiming_uniform(rng, {cout, cin, 3, 3}, cin * 9), false});
  out.push_back({name + ".b", Tensor({cout}), false});
}

void push_fc(std::vector<NamedTensor>& out, Rng& rng, const std::string& name,
             std::size_t units, std::size_t fan_in) {
  out.push_back({name + ".w", kaiming_uniform(rng, {units, fan_in}, fan_in), false});
  out.push_back({name + ".b", Tensor({units}), false});
}

}  // namespace

ParameterSet build_autoencoder(const ModelConfig& config) {
  config.validate();
  const std::size_t c1 = config.channels(0), c2 = config.channels(1), c3 = config.channels(2);
  ParameterSet ps;
  ps.config = config;
  Rng rng(config.seed);
  push_conv(ps.tensors, rng, "enc.conv1", c1, 1);
  push_conv(ps.tensors, rng, "enc.conv2", c2, c1);
  push_conv(ps.tensors, rng, "enc.conv3", c3, c2);
  push_conv(ps.tensors, rng, "dec.conv1", c3, c3);
  push_conv(ps.tensors, rng, "dec.conv2", c2, c3);
  push_conv(ps.tensors, rng, "dec.conv3", c1, c2);
  push_conv(ps.tensors, rng, "dec.conv4", 1, c1);
  return ps;
}

void check_arch_match(const ModelConfig& have, const ModelConfig& want) {
  if (have.input_size != want.input_size)
    throw ValidationError("architecture mismatch: input_size " + std::to_string(have.input_size) +
                          " vs " + std::to_string(want.input_size));
  if (have.base_channels != want.base_channels) {
    auto fmt = [](const std::vector<std::uint32_t>& v) {
      std::string s = "[";
      for (std::size_t i = 0; i < v.size(); ++i)
        s += (i ? "," : "") + std::to_string(v[i]);
      return s + "]";
    };
    throw ValidationError("architecture mismatch: base_channels " + fmt(have.base_channels) +
                          " vs " + fmt(want.base_channels));
  }
  if (have.width_mult != want.width_mult)
    throw ValidationError("architecture mismatch: width_mult " + std::to_string(have.width_mult) +
                          " vs " + std::to_string(want.width_mult));
}

ParameterSet build_classifier(const ParameterSet& encoder_src, const ModelConfig& config) {
  config.validate();
  check_arch_match(encoder_src.config, config);
  if (!encoder_src.find("enc.conv1.w"))
    throw ValidationError("build_classifier: source model has no encoder tensors");

  ParameterSet ps;
  ps.config = config;
  for (const auto& nt : encoder_src.tensors) {
    if (nt.name.rfind("enc.", 0) != 0) continue;
    NamedTensor copy{nt.name, nt.tensor, true};
    copy.tensor.grad.clear();
    ps.tensors.push_back(std::move(copy));
  }
  Rng rng(config.seed);
  push_fc(ps.tensors, rng, "clf.fc1", config.fc_units(), config.latent_numel());
  push_fc(ps.tensors, rng, "clf.fc2", 1, config.fc_units());
  return ps;
}

// ---------------------------------------------------------------------------
// inference helpers
// ---------------------------------------------------------------------------

Tensor frame_to_tensor(const EventFrame& frame, std::size_t size) {
  if (frame.width == 0 || frame.height == 0)
    throw ValidationError("frame_to_tensor: empty frame");
  Tensor t({1, 1, size, size});
  for (std::size_t y = 0; y < size; ++y) {
    const std::size_t sy = y * frame.height / size;
    for (std::size_t x = 0; x < size; ++x) {
      const std::size_t sx = x * frame.width / size;
      t.data[y * size + x] = frame.mask[sy * frame.width + sx] ? 1.0f : 0.0f;
    }
  }
  return t;
}

Tensor frames_to_tensor(std::span<const EventFrame> frames, std::size_t size) {
  if (frames.empty()) throw ValidationError("frames_to_tensor: no frames");
  Tensor batch({frames.size(), 1, size, size});
  const std::size_t plane = size * size;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    Tensor one = frame_to_tensor(frames[i], size);
    std::copy(one.data.begin(), one.data.end(), batch.data.begin() + i * plane);
  }
  return batch;
}

namespace {

void check_model_input(const ParameterSet& ps, const Tensor& input) {
  const std::size_t s = ps.config.input_size;
  if (input.rank() != 4 || input.dim(1) != 1 || input.dim(2) != s || input.dim(3) != s)
    throw ValidationError("model input must be [N,1," + std::to_string(s) + "," +
                          std::to_string(s) + "], got " + shape_str(input.shape));
}

}  // namespace

Tensor reconstruct(const ParameterSet& ps, const Tensor& input) {
  check_model_input(ps, input);
  if (!ps.find("dec.conv1.w"))
    throw ValidationError("reconstruct: model has no decoder tensors");
  const auto layers = autoencoder_layers();
  return run_layers(ps, layers, input);
}

Tensor reconstruct(const ParameterSet& ps, const EventFrame& frame) {
  return reconstruct(ps, frame_to_tensor(frame, ps.config.input_size));
}

Tensor encode(const ParameterSet& ps, const Tensor& input) {
  check_model_input(ps, input);
  const auto layers = encoder_layers();
  return run_layers(ps, layers, input);
}

Tensor encode(const ParameterSet& ps, const EventFrame& frame) {
  Tensor latent = encode(ps, frame_to_tensor(frame, ps.config.input_size));
  latent.shape = {latent.dim(1), latent.dim(2), latent.dim(3)};
  return latent;
}

Tensor decode_latent(const ParameterSet& ps, const Tensor& latent) {
  const std::size_t c3 = ps.config.channels(2), side = ps.config.latent_side();
  Tensor in = latent;
  in.grad.clear();
  if (in.rank() == 3) in.shape = {1, latent.dim(0), latent.dim(1), latent.dim(2)};
  if (in.rank() != 4 || in.dim(1) != c3 || in.dim(2) != side || in.dim(3) != side)
    throw ValidationError("decode_latent: latent must be [" + std::to_string(c3) + "," +
                          std::to_string(side) + "," + std::to_string(side) + "], got " +
                          shape_str(latent.shape));
  const auto layers = decoder_layers();
  return run_layers(ps, layers, in);
}

Tensor predict(const ParameterSet& ps, const Tensor& input) {
  check_model_input(ps, input);
  if (!ps.has_classifier_head())
    throw ValidationError("predict: model has no classifier head");
  const auto layers = classifier_layers();
  return run_layers(ps, layers, input);
}

double predict(const ParameterSet& ps, const EventFrame& frame) {
  Tensor out = predict(ps, frame_to_tensor(frame, ps.config.input_size));
  return static_cast<double>(out.data[0]);
}

// ---------------------------------------------------------------------------
// weight files
// ---------------------------------------------------------------------------

namespace {

constexpr char kWeightMagic[4] = {'E', 'A', 'W', '1'};
constexpr std::uint16_t kWeightVersion = 1;

void write_config(ByteWriter& w, const ModelConfig& c) {
  w.u32le(c.input_size);
  w.u8(static_cast<std::uint8_t>(c.base_channels.size()));
  for (auto ch : c.base_channels) w.u32le(ch);
  w.f64le(c.width_mult);
  w.u32le(c.fc_hidden);
  w.u8(static_cast<std::uint8_t>(c.loss));
  w.u64le(c.seed);
}

ModelConfig read_config(ByteReader& r) {
  ModelConfig c;
  c.input_size = r.u32le("config input_size");
  const std::uint8_t n = r.u8("config channel count");
  c.base_channels.clear();
  for (std::uint8_t i = 0; i < n; ++i) c.base_channels.push_back(r.u32le("config channel"));
  c.width_mult = r.f64le("config width_mult");
  c.fc_hidden = r.u32le("config fc_hidden");
  const std::uint8_t loss = r.u8("config loss");
  if (loss > 1)
    throw DecodeError("weights: invalid loss id " + std::to_string(loss));
  c.loss = static_cast<LossKind>(loss);
  c.seed = r.u64le("config seed");
  c.validate();
  return c;
}

}  // namespace

Bytes encode_weights(const ParameterSet& ps) {
  ByteWriter w;
  w.bytes(kWeightMagic, 4);
  w.u16le(kWeightVersion);
  write_config(w, ps.config);
  w.u32le(static_cast<std::uint32_t>(ps.tensors.size()));
  for (const auto& nt : ps.tensors) {
    if (nt.name.size() > 0xffff)
      throw ValidationError("weights: tensor name too long");
    w.u16le(static_cast<std::uint16_t>(nt.name.size()));
    w.bytes(nt.name.data(), nt.name.size());
    w.u8(static_cast<std::uint8_t>(nt.tensor.rank()));
    for (std::size_t d = 0; d < nt.tensor.rank(); ++d)
      w.u32le(static_cast<std::uint32_t>(nt.tensor.dim(d)));
    w.u8(nt.frozen ? 1 : 0);
    for (float v : nt.tensor.data) w.f32le(v);
  }
  return w.take();
}

ParameterSet decode_weights(const Bytes& bytes) {
  ByteReader r(bytes);
  char magic[4];
  r.bytes(magic, 4, "magic");
  if (std::memcmp(magic, kWeightMagic, 4) != 0)
    throw DecodeError("weights: bad magic, expected EAW1");
  const std::uint16_t version = r.u16le("version");
  if (version != kWeightVersion)
    throw DecodeError("weights: unsupported version " + std::to_string(version));

  ParameterSet ps;
  ps.config = read_config(r);
  const std::uint32_t count = r.u32le("tensor count");
  std::set<std::string> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor nt;
    const std::uint16_t name_len = r.u16le("tensor name length");
    nt.name.resize(name_len);
    r.bytes(nt.name.data(), name_len, "tensor name");
    if (!seen.insert(nt.name).second)
      throw DecodeError("weights: duplicate tensor " + nt.name);
    const std::uint8_t rank = r.u8("tensor rank");
    if (rank == 0 || rank > 4)
      throw DecodeError("weights: tensor " + nt.name + " has unsupported rank " +
                        std::to_string(rank));
    std::vector<std::size_t> shape;
    std::size_t numel = 1;
    for (std::uint8_t d = 0; d < rank; ++d) {
      const std::uint32_t extent = r.u32le("tensor extent");
      if (extent == 0) throw DecodeError("weights: tensor " + nt.name + " has a zero extent");
      if (numel > (std::size_t{1} << 32) / extent)
        throw DecodeError("weights: tensor " + nt.name + " is implausibly large");
      numel *= extent;
      shape.push_back(extent);
    }
    const std::uint8_t frozen = r.u8("frozen flag");
    if (frozen > 1)
      throw DecodeError("weights: invalid frozen flag for tensor " + nt.name);
    nt.frozen = frozen != 0;
    nt.tensor = Tensor(std::move(shape));
    for (std::size_t j = 0; j < numel; ++j) nt.tensor.data[j] = r.f32le("tensor data");
    ps.tensors.push_back(std::move(nt));
  }
  if (!r.at_end())
    throw DecodeError("weights: " + std::to_string(r.remaining()) +
                      " trailing bytes after tensor data");
  return ps;
}

void save_weights(const ParameterSet& ps, const std::filesystem::path& path) {
  write_file_atomic(path, encode_weights(ps));
}

ParameterSet load_weights(const std::filesystem::path& path) {
  try {
    return decode_weights(read_file(path));
  } catch (const DecodeError& e) {
    throw DecodeError(path.string() + ": " + e.what());
  }
}

}  // namespace evlab
