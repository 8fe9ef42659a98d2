#include "sonarssl/model.hpp"

#include <cmath>

namespace sonarssl {

namespace {

void he_normal(Tensor& t, std::size_t fan_in, Rng& rng) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (double& v : t.data) v = rng.normal(0.0, stddev);
}

void register_conv(ParamSet& params, const std::string& name, const ConvSpec& spec, Rng& rng) {
  Tensor w({spec.out_ch, spec.in_ch, spec.kernel, spec.kernel});
  he_normal(w, spec.in_ch * spec.kernel * spec.kernel, rng);
  params.add(name + ".weight", ParamKind::weight, std::move(w));
  params.add(name + ".bias", ParamKind::weight, Tensor({spec.out_ch}, 0.0));
}

void register_bn(ParamSet& params, const std::string& name, std::size_t channels) {
  params.add(name + ".gamma", ParamKind::weight, Tensor({channels}, 1.0));
  params.add(name + ".beta", ParamKind::weight, Tensor({channels}, 0.0));
  params.add(name + ".running_mean", ParamKind::buffer, Tensor({channels}, 0.0));
  params.add(name + ".running_var", ParamKind::buffer, Tensor({channels}, 1.0));
}

struct BlockDesc {
  std::string prefix;
  ConvSpec conv1, conv2, skip;
  bool has_skip = false;
};

// Single source of truth for the block topology; registration, forward,
// backward, and the BN commit all walk this list.
std::vector<BlockDesc> block_descs(const EncoderConfig& config, const std::string& prefix) {
  std::vector<BlockDesc> descs;
  std::size_t in_ch = config.stage_widths.front();
  for (std::size_t i = 0; i < config.stage_widths.size(); ++i) {
    const std::size_t out_ch = config.stage_widths[i];
    for (std::size_t j = 0; j < config.blocks_per_stage[i]; ++j) {
      BlockDesc d;
      d.prefix = prefix + ".s" + std::to_string(i) + "b" + std::to_string(j);
      const std::size_t stride = (j == 0 && i > 0) ? 2 : 1;
      d.conv1 = {in_ch, out_ch, 3, stride, 1};
      d.conv2 = {out_ch, out_ch, 3, 1, 1};
      d.has_skip = stride != 1 || in_ch != out_ch;
      if (d.has_skip) d.skip = {in_ch, out_ch, 1, stride, 0};
      descs.push_back(std::move(d));
      in_ch = out_ch;
    }
  }
  return descs;
}

Tensor tensor_add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "residual add");
  Tensor y = a;
  for (std::size_t i = 0; i < y.numel(); ++i) y.data[i] += b.data[i];
  return y;
}

}  // namespace

void EncoderConfig::validate() const {
  if (input_channels != 2) throw ConfigError("encoder: input_channels must be 2");
  if (stage_widths.empty()) throw ConfigError("encoder: stage_widths must be nonempty");
  if (blocks_per_stage.size() != stage_widths.size())
    throw ConfigError("encoder: blocks_per_stage must match stage_widths in length");
  for (std::size_t w : stage_widths)
    if (w == 0) throw ConfigError("encoder: stage widths must be positive");
  for (std::size_t b : blocks_per_stage)
    if (b == 0) throw ConfigError("encoder: every stage needs at least one block");
  if (feature_dim < 8) throw ConfigError("encoder: feature_dim must be at least 8");
  if (feature_dim != stage_widths.back())
    throw ConfigError("encoder: feature_dim must equal the last stage width");
  if (input_size < 8 || input_size % 2 != 0)
    throw ConfigError("encoder: input_size must be even and >= 8");
  if (stem_stride == 0) throw ConfigError("encoder: stem_stride must be positive");
}

void HeadConfig::validate() const {
  if (hidden_dim < 1 || output_dim < 1 || predictor_hidden_dim < 1)
    throw ConfigError("head: dimensions must be >= 1");
}

void register_encoder(ParamSet& params, const EncoderConfig& config, const std::string& prefix,
                      Rng& rng) {
  config.validate();
  const ConvSpec stem{config.input_channels, config.stage_widths.front(), 3, config.stem_stride,
                      1};
  register_conv(params, prefix + ".stem", stem, rng);
  register_bn(params, prefix + ".stem_bn", stem.out_ch);
  for (const BlockDesc& d : block_descs(config, prefix)) {
    register_conv(params, d.prefix + ".conv1", d.conv1, rng);
    register_bn(params, d.prefix + ".bn1", d.conv1.out_ch);
    register_conv(params, d.prefix + ".conv2", d.conv2, rng);
    register_bn(params, d.prefix + ".bn2", d.conv2.out_ch);
    if (d.has_skip) {
      register_conv(params, d.prefix + ".skip", d.skip, rng);
      register_bn(params, d.prefix + ".skip_bn", d.skip.out_ch);
    }
  }
}

void register_mlp(ParamSet& params, const std::string& prefix, std::size_t in_dim,
                  std::size_t hidden_dim, std::size_t out_dim, Rng& rng) {
  Tensor w1({hidden_dim, in_dim});
  he_normal(w1, in_dim, rng);
  params.add(prefix + ".fc1.weight", ParamKind::weight, std::move(w1));
  params.add(prefix + ".fc1.bias", ParamKind::weight, Tensor({hidden_dim}, 0.0));
  Tensor w2({out_dim, hidden_dim});
  he_normal(w2, hidden_dim, rng);
  params.add(prefix + ".fc2.weight", ParamKind::weight, std::move(w2));
  params.add(prefix + ".fc2.bias", ParamKind::weight, Tensor({out_dim}, 0.0));
}

void register_linear(ParamSet& params, const std::string& prefix, std::size_t in_dim,
                     std::size_t out_dim, Rng& rng) {
  Tensor w({out_dim, in_dim});
  he_normal(w, in_dim, rng);
  params.add(prefix + ".weight", ParamKind::weight, std::move(w));
  params.add(prefix + ".bias", ParamKind::weight, Tensor({out_dim}, 0.0));
}

ParamSet init_params(const EncoderConfig& config, std::uint64_t seed) {
  ParamSet params;
  Rng rng(seed);
  register_encoder(params, config, "encoder", rng);
  return params;
}

Tensor encoder_forward(const ParamSet& params, const EncoderConfig& config,
                       const std::string& prefix, const Tensor& batch, BnMode mode,
                       EncoderActs* acts) {
  config.validate();
  if (batch.rank() != 4 || batch.dim(1) != config.input_channels ||
      batch.dim(2) != config.input_size || batch.dim(3) != config.input_size)
    throw InputError("encoder: batch shape does not match the configuration");

  const ConvSpec stem{config.input_channels, config.stage_widths.front(), 3, config.stem_stride,
                      1};
  const auto descs = block_descs(config, prefix);
  if (acts) acts->blocks.resize(descs.size());

  Tensor x = conv2d_forward(params, prefix + ".stem", stem, batch, acts ? &acts->stem_c : nullptr);
  x = bn_forward(params, prefix + ".stem_bn", x, mode, acts ? &acts->stem_b : nullptr);
  x = relu_forward(x, acts ? &acts->stem_r : nullptr);

  for (std::size_t i = 0; i < descs.size(); ++i) {
    const BlockDesc& d = descs[i];
    BlockActs* ba = acts ? &acts->blocks[i] : nullptr;
    if (ba) ba->has_skip = d.has_skip;
    Tensor main = conv2d_forward(params, d.prefix + ".conv1", d.conv1, x, ba ? &ba->c1 : nullptr);
    main = bn_forward(params, d.prefix + ".bn1", main, mode, ba ? &ba->b1 : nullptr);
    main = relu_forward(main, ba ? &ba->r1 : nullptr);
    main = conv2d_forward(params, d.prefix + ".conv2", d.conv2, main, ba ? &ba->c2 : nullptr);
    main = bn_forward(params, d.prefix + ".bn2", main, mode, ba ? &ba->b2 : nullptr);

    Tensor skip;
    if (d.has_skip) {
      skip = conv2d_forward(params, d.prefix + ".skip", d.skip, x, ba ? &ba->cs : nullptr);
      skip = bn_forward(params, d.prefix + ".skip_bn", skip, mode, ba ? &ba->bs : nullptr);
    } else {
      skip = x;
    }
    x = relu_forward(tensor_add(main, skip), ba ? &ba->r2 : nullptr);
  }
  return gap_forward(x, acts ? &acts->gap : nullptr);
}

Tensor encoder_backward(const ParamSet& params, const EncoderConfig& config,
                        const std::string& prefix, const EncoderActs& acts, const Tensor& dfeat,
                        Grads& grads) {
  const auto descs = block_descs(config, prefix);
  if (acts.blocks.size() != descs.size())
    throw InputError("encoder backward: activation record does not match the topology");

  Tensor dx = gap_backward(acts.gap, dfeat);
  for (std::size_t i = descs.size(); i-- > 0;) {
    const BlockDesc& d = descs[i];
    const BlockActs& ba = acts.blocks[i];
    Tensor dsum = relu_backward(ba.r2, dx);

    Tensor dmain = bn_backward(params, d.prefix + ".bn2", ba.b2, dsum, grads);
    dmain = conv2d_backward(params, d.prefix + ".conv2", d.conv2, ba.c2, dmain, grads);
    dmain = relu_backward(ba.r1, dmain);
    dmain = bn_backward(params, d.prefix + ".bn1", ba.b1, dmain, grads);
    dmain = conv2d_backward(params, d.prefix + ".conv1", d.conv1, ba.c1, dmain, grads);

    if (d.has_skip) {
      Tensor dskip = bn_backward(params, d.prefix + ".skip_bn", ba.bs, dsum, grads);
      dskip = conv2d_backward(params, d.prefix + ".skip", d.skip, ba.cs, dskip, grads);
      dx = tensor_add(dmain, dskip);
    } else {
      dx = tensor_add(dmain, dsum);
    }
  }

  dx = relu_backward(acts.stem_r, dx);
  dx = bn_backward(params, prefix + ".stem_bn", acts.stem_b, dx, grads);
  const ConvSpec stem{config.input_channels, config.stage_widths.front(), 3, config.stem_stride,
                      1};
  return conv2d_backward(params, prefix + ".stem", stem, acts.stem_c, dx, grads);
}

void encoder_commit_bn(ParamSet& params, const EncoderConfig& config, const std::string& prefix,
                       const EncoderActs& acts) {
  bn_commit(params, prefix + ".stem_bn", acts.stem_b);
  const auto descs = block_descs(config, prefix);
  for (std::size_t i = 0; i < descs.size(); ++i) {
    bn_commit(params, descs[i].prefix + ".bn1", acts.blocks[i].b1);
    bn_commit(params, descs[i].prefix + ".bn2", acts.blocks[i].b2);
    if (descs[i].has_skip) bn_commit(params, descs[i].prefix + ".skip_bn", acts.blocks[i].bs);
  }
}

Tensor mlp_forward(const ParamSet& params, const std::string& prefix, const Tensor& x,
                   MlpActs* acts) {
  Tensor h = linear_forward(params, prefix + ".fc1", x, acts ? &acts->l1 : nullptr);
  h = relu_forward(h, acts ? &acts->r : nullptr);
  return linear_forward(params, prefix + ".fc2", h, acts ? &acts->l2 : nullptr);
}

Tensor mlp_backward(const ParamSet& params, const std::string& prefix, const MlpActs& acts,
                    const Tensor& dy, Grads& grads) {
  Tensor dh = linear_backward(params, prefix + ".fc2", acts.l2, dy, grads);
  dh = relu_backward(acts.r, dh);
  return linear_backward(params, prefix + ".fc1", acts.l1, dh, grads);
}

Tensor batch_to_tensor(const std::vector<const Snippet*>& batch) {
  if (batch.empty()) throw InputError("batch_to_tensor: empty batch");
  const std::size_t s = batch.front()->size;
  Tensor x({batch.size(), Snippet::kBands, s, s});
  const std::size_t per = Snippet::kBands * s * s;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Snippet& sn = *batch[i];
    if (sn.size != s || sn.values.size() != per)
      throw InputError("batch_to_tensor: snippet shapes differ within the batch");
    std::copy(sn.values.begin(), sn.values.end(), x.data.begin() + i * per);
  }
  return x;
}

}  // namespace sonarssl
