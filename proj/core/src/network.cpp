#include "tempro/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <random>

#include <json.hpp>

namespace tempro::net {

using nlohmann::json;

std::string variant_name(Variant v) {
    return v == Variant::DeepPro ? "deeppro" : "deeppro-plus";
}

Variant variant_from_name(const std::string& name) {
    if (name == "deeppro") return Variant::DeepPro;
    if (name == "deeppro-plus" || name == "deeppro_plus") return Variant::DeepProPlus;
    throw ShapeError("unknown variant '" + name + "' (expected deeppro or deeppro-plus)");
}

ModelSpec ModelSpec::deeppro(int T, int channels, int m) {
    ModelSpec s;
    s.variant = Variant::DeepPro;
    s.T = T;
    s.channels = channels;
    s.m = m;
    s.level_pools = {0, 1, 2};
    s.blocks_per_level = 2;
    s.stem_kt = 5;
    s.stem_spatial = 1;
    s.block_td_kt = 3;
    s.block_td_spatial = 1;
    s.block_td_dilation = 2;
    s.block_mid_kt = 3;
    s.block_mid_spatial = 1;
    s.block_mid_spatial_dilation = 1;
    return s;
}

ModelSpec ModelSpec::deeppro_plus(int T, int channels, int m) {
    ModelSpec s;
    s.variant = Variant::DeepProPlus;
    s.T = T;
    s.channels = channels;
    s.m = m;
    s.level_pools = {0};
    s.blocks_per_level = 2;
    s.stem_kt = 5;
    s.stem_spatial = 7;
    s.block_td_kt = 3;
    s.block_td_spatial = 3;
    s.block_td_dilation = 2;
    s.block_mid_kt = 3;
    s.block_mid_spatial = 3;
    s.block_mid_spatial_dilation = 2;
    return s;
}

void ModelSpec::validate() const {
    if (T < 1) throw ShapeError("ModelSpec: T must be >= 1");
    if (channels < 1 || m < 1) throw ShapeError("ModelSpec: channels and m must be >= 1");
    if (channels % m != 0)
        throw ShapeError("ModelSpec: channels (" + std::to_string(channels) + ") not divisible by m (" + std::to_string(m) + ")");
    if (blocks_per_level < 1) throw ShapeError("ModelSpec: blocks_per_level must be >= 1");
    if (level_pools.empty()) throw ShapeError("ModelSpec: at least one level required");
    for (int p : level_pools)
        if (p < 0) throw ShapeError("ModelSpec: pool count must be >= 0");
    for (int k : {stem_kt, stem_spatial, block_td_kt, block_td_spatial, block_mid_kt, block_mid_spatial})
        if (k < 1 || k % 2 == 0) throw ShapeError("ModelSpec: kernel sizes must be positive and odd");
    if (block_td_dilation < 1 || block_mid_spatial_dilation < 1)
        throw ShapeError("ModelSpec: dilations must be >= 1");
    if (variant == Variant::DeepPro) {
        if (stem_spatial != 1 || block_td_spatial != 1 || block_mid_spatial != 1)
            throw ShapeError("ModelSpec: DeepPro computes in the time dimension only (spatial kernels must be 1)");
    } else {
        if (level_pools.size() != 1 || level_pools[0] != 0)
            throw ShapeError("ModelSpec: DeepPro-Plus has a single level without pooling");
    }
}

int ModelSpec::max_pool_count() const {
    int mx = 0;
    for (int p : level_pools) mx = std::max(mx, p);
    return mx;
}

std::string ModelSpec::to_json() const {
    json j;
    j["variant"] = variant_name(variant);
    j["T"] = T;
    j["m"] = m;
    j["channels"] = channels;
    j["level_pools"] = level_pools;
    j["blocks_per_level"] = blocks_per_level;
    j["stem_kt"] = stem_kt;
    j["stem_spatial"] = stem_spatial;
    j["block_td_kt"] = block_td_kt;
    j["block_td_spatial"] = block_td_spatial;
    j["block_td_dilation"] = block_td_dilation;
    j["block_mid_kt"] = block_mid_kt;
    j["block_mid_spatial"] = block_mid_spatial;
    j["block_mid_spatial_dilation"] = block_mid_spatial_dilation;
    return j.dump();
}

ModelSpec ModelSpec::from_json(const std::string& text) {
    json j = json::parse(text);
    ModelSpec s;
    s.variant = variant_from_name(j.at("variant").get<std::string>());
    s.T = j.at("T").get<int>();
    s.m = j.at("m").get<int>();
    s.channels = j.at("channels").get<int>();
    s.level_pools = j.at("level_pools").get<std::vector<int>>();
    s.blocks_per_level = j.at("blocks_per_level").get<int>();
    s.stem_kt = j.at("stem_kt").get<int>();
    s.stem_spatial = j.at("stem_spatial").get<int>();
    s.block_td_kt = j.at("block_td_kt").get<int>();
    s.block_td_spatial = j.at("block_td_spatial").get<int>();
    s.block_td_dilation = j.at("block_td_dilation").get<int>();
    s.block_mid_kt = j.at("block_mid_kt").get<int>();
    s.block_mid_spatial = j.at("block_mid_spatial").get<int>();
    s.block_mid_spatial_dilation = j.at("block_mid_spatial_dilation").get<int>();
    s.validate();
    return s;
}

Tensor ConvLayer::forward(Tape& tape, const Tensor& x, bool training, std::vector<BnUpdate>* updates) const {
    Tensor y;
    switch (kind) {
        case ConvKind::Plain: y = conv3d(tape, x, weight, dilation); break;
        case ConvKind::TimeDiff: y = td_conv(tape, x, weight, dilation.t); break;
        case ConvKind::SpaceDiff: y = sd_conv(tape, x, weight, dilation.h); break;
    }
    if (bias.defined()) y = add_channel_bias(tape, y, bias);
    if (has_bn) y = batch_norm(tape, y, gamma, beta, bn, training, updates);
    if (has_relu) y = relu(tape, y);
    return y;
}

Tensor ResBlock::forward(Tape& tape, const Tensor& x, bool training, std::vector<BnUpdate>* updates) const {
    Tensor y = diff.forward(tape, x, training, updates);
    y = mid.forward(tape, y, training, updates);
    y = pw.forward(tape, y, training, updates);
    return add(tape, x, y);
}

Tensor TProBlock::forward(Tape& tape, const Tensor& x, bool training, std::vector<BnUpdate>* updates) const {
    const std::int64_t C = x.extent(0);
    const std::int64_t m = static_cast<std::int64_t>(scorms.size());
    if (m == 0) throw ShapeError("TPro: no SCorMs");
    if (C % m != 0) throw ShapeError("TPro: channels not divisible by m");
    const std::int64_t group = C / m;
    std::vector<Tensor> parts;
    parts.reserve(static_cast<std::size_t>(m));
    for (std::int64_t i = 0; i < m; ++i) {
        Tensor g = slice_channels(tape, x, i * group, (i + 1) * group);
        parts.push_back(matmul_time(tape, g, scorms[static_cast<std::size_t>(i)]));
    }
    Tensor cat = concat_channels(tape, parts);
    return pw.forward(tape, cat, training, updates);
}

namespace {

std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

Tensor kaiming_conv(std::int64_t co, std::int64_t ci, std::int64_t kt, std::int64_t kh, std::int64_t kw,
                    std::mt19937_64& rng) {
    const double fan_in = static_cast<double>(ci * kt * kh * kw);
    std::normal_distribution<double> nd(0.0, std::sqrt(2.0 / fan_in));
    Tensor w = Tensor::zeros({co, ci, kt, kh, kw}, /*requires_grad=*/true);
    for (double& v : w.mutable_data()) v = nd(rng);
    return w;
}

ConvLayer make_layer(ConvKind kind, std::int64_t ci, std::int64_t co, std::int64_t kt, std::int64_t ksp,
                     Dilation3 dil, bool bn, bool relu_act, bool with_bias, std::mt19937_64& rng) {
    ConvLayer layer;
    layer.kind = kind;
    layer.dilation = dil;
    layer.weight = kaiming_conv(co, ci, kt, ksp, ksp, rng);
    if (with_bias) layer.bias = Tensor::zeros({co}, /*requires_grad=*/true);
    layer.has_bn = bn;
    layer.has_relu = relu_act;
    if (bn) {
        layer.gamma = Tensor::full({co}, 1.0, /*requires_grad=*/true);
        layer.beta = Tensor::zeros({co}, /*requires_grad=*/true);
        layer.bn = BnBuffers(co);
    }
    return layer;
}

Tensor scorm_init(int T, std::mt19937_64& rng) {
    Tensor w = Tensor::identity(T, /*requires_grad=*/true);
    std::normal_distribution<double> nd(0.0, 0.01);
    for (double& v : w.mutable_data()) v += nd(rng);
    return w;
}

/// Zero-pads [L,H,W] to [T,H,W] along the leading (time) axis.
Tensor pad_time(Tape& tape, const Tensor& s, std::int64_t T) {
    const std::int64_t L = s.extent(0);
    if (L == T) return s;
    Shape shape = s.shape();
    shape[0] = T;
    const bool track = s.requires_grad();
    Tensor out = Tensor::zeros(shape);
    if (track) out.set_requires_grad(true);
    const auto d = s.data();
    std::copy(d.begin(), d.end(), out.mutable_data().begin());
    if (track) {
        tape.record({s}, out, [](BackwardCtx& ctx) {
            const auto g = ctx.out_grad();
            auto gi = ctx.grad_for(0);
            for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += g[i];
        });
    }
    return out;
}

void visit_layer_params(ConvLayer& l, const std::string& prefix,
                        const std::function<void(const std::string&, Tensor&)>& fn) {
    fn(prefix + ".weight", l.weight);
    if (l.bias.defined()) fn(prefix + ".bias", l.bias);
    if (l.has_bn) {
        fn(prefix + ".bn_gamma", l.gamma);
        fn(prefix + ".bn_beta", l.beta);
    }
}

void visit_layer_buffers(ConvLayer& l, const std::string& prefix,
                         const std::function<void(const std::string&, std::vector<double>&)>& fn) {
    if (l.has_bn) {
        fn(prefix + ".bn_mean", l.bn.running_mean);
        fn(prefix + ".bn_var", l.bn.running_var);
    }
}

}  // namespace

Model build(const ModelSpec& spec, std::uint64_t seed) {
    spec.validate();
    std::mt19937_64 rng(mix_seed(seed) ^ 0xdeb6a9);
    const int C = spec.channels;
    const bool plus = spec.variant == Variant::DeepProPlus;

    Model model;
    model.spec = spec;
    for (std::size_t li = 0; li < spec.level_pools.size(); ++li) {
        Level level;
        level.pool_count = spec.level_pools[li];
        if (plus) {
            level.stem = make_layer(ConvKind::SpaceDiff, 1, C, spec.stem_kt, spec.stem_spatial,
                                    Dilation3{1, 1, 1}, true, true, false, rng);
        } else {
            level.stem = make_layer(ConvKind::Plain, 1, C, spec.stem_kt, spec.stem_spatial,
                                    Dilation3{1, 1, 1}, true, true, false, rng);
        }
        for (int b = 0; b < spec.blocks_per_level; ++b) {
            ResBlock block;
            if (plus) {
                // STD-ResBlock: SD-Conv -> TD-Conv (3x3x3) -> P-Conv + skip.
                block.diff = make_layer(ConvKind::SpaceDiff, C, C, spec.block_mid_kt, spec.block_mid_spatial,
                                        Dilation3{1, spec.block_mid_spatial_dilation, spec.block_mid_spatial_dilation},
                                        true, true, false, rng);
                block.mid = make_layer(ConvKind::TimeDiff, C, C, spec.block_td_kt, spec.block_td_spatial,
                                       Dilation3{spec.block_td_dilation, 1, 1}, true, true, false, rng);
            } else {
                // TD-ResBlock: TD-Conv -> T-Conv -> P-Conv + skip.
                block.diff = make_layer(ConvKind::TimeDiff, C, C, spec.block_td_kt, spec.block_td_spatial,
                                        Dilation3{spec.block_td_dilation, 1, 1}, true, true, false, rng);
                block.mid = make_layer(ConvKind::Plain, C, C, spec.block_mid_kt, spec.block_mid_spatial,
                                       Dilation3{1, 1, 1}, true, true, false, rng);
            }
            block.pw = make_layer(ConvKind::Plain, C, C, 1, 1, Dilation3{}, true, true, false, rng);
            level.blocks.push_back(std::move(block));
        }
        for (int i = 0; i < spec.m; ++i) level.tpro.scorms.push_back(scorm_init(spec.T, rng));
        level.tpro.pw = make_layer(ConvKind::Plain, C, C, 1, 1, Dilation3{}, true, true, false, rng);
        model.levels.push_back(std::move(level));
    }
    const std::int64_t c_total = static_cast<std::int64_t>(spec.level_pools.size()) * C;
    model.head_fuse = make_layer(ConvKind::Plain, c_total, C, 1, 1, Dilation3{}, true, true, false, rng);
    model.head_out = make_layer(ConvKind::Plain, C, 1, 1, 1, Dilation3{}, false, false, true, rng);
    return model;
}

Tensor forward(Tape& tape, const Model& model, const Tensor& s, bool training,
               std::vector<BnUpdate>* updates) {
    if (s.dim() != 3) throw ShapeError("forward: input must be [L,H,W], got " + shape_str(s.shape()));
    const std::int64_t T = model.spec.T;
    const std::int64_t L = s.extent(0), H = s.extent(1), W = s.extent(2);
    if (L > T) throw ShapeError("forward: input has more frames than the model's T; use detect_sequence");
    const std::int64_t div = std::int64_t{1} << model.spec.max_pool_count();
    if (H % div != 0 || W % div != 0)
        throw ShapeError("forward: spatial dims must be divisible by " + std::to_string(div));

    Tensor x = pad_time(tape, s, T);
    x = reshape(tape, x, {1, T, H, W});

    std::vector<Tensor> level_outs;
    for (const Level& level : model.levels) {
        Tensor y = x;
        for (int p = 0; p < level.pool_count; ++p) y = max_pool2d(tape, y);
        y = level.stem.forward(tape, y, training, updates);
        for (const ResBlock& block : level.blocks) y = block.forward(tape, y, training, updates);
        y = level.tpro.forward(tape, y, training, updates);
        for (int p = 0; p < level.pool_count; ++p) y = upsample_nearest2d(tape, y, 2);
        level_outs.push_back(y);
    }
    Tensor cat = level_outs.size() == 1 ? level_outs[0] : concat_channels(tape, level_outs);
    Tensor fused = model.head_fuse.forward(tape, cat, training, updates);
    Tensor logits = model.head_out.forward(tape, fused, training, updates);
    return reshape(tape, logits, {T, H, W});
}

Tensor predict(const Model& model, const Tensor& s) {
    Tape tape;
    Tensor logits = forward(tape, model, s, /*training=*/false, nullptr);
    return sigmoid(tape, logits);
}

ParamGradGuard::ParamGradGuard(Model& model) {
    model.visit_params([&](const std::string&, Tensor& t) {
        if (t.requires_grad()) {
            t.set_requires_grad(false);
            flipped_.push_back(t);
        }
    });
}

ParamGradGuard::~ParamGradGuard() {
    for (Tensor& t : flipped_) t.set_requires_grad(true);
}

void Model::visit_params(const std::function<void(const std::string&, Tensor&)>& fn) {
    for (std::size_t li = 0; li < levels.size(); ++li) {
        const std::string lp = "level" + std::to_string(li);
        Level& level = levels[li];
        visit_layer_params(level.stem, lp + ".stem", fn);
        for (std::size_t b = 0; b < level.blocks.size(); ++b) {
            const std::string bp = lp + ".block" + std::to_string(b);
            visit_layer_params(level.blocks[b].diff, bp + ".diff", fn);
            visit_layer_params(level.blocks[b].mid, bp + ".mid", fn);
            visit_layer_params(level.blocks[b].pw, bp + ".pw", fn);
        }
        for (std::size_t k = 0; k < level.tpro.scorms.size(); ++k)
            fn(lp + ".tpro.scorm" + std::to_string(k), level.tpro.scorms[k]);
        visit_layer_params(level.tpro.pw, lp + ".tpro.pw", fn);
    }
    visit_layer_params(head_fuse, "head.fuse", fn);
    visit_layer_params(head_out, "head.out", fn);
}

void Model::visit_buffers(const std::function<void(const std::string&, std::vector<double>&)>& fn) {
    for (std::size_t li = 0; li < levels.size(); ++li) {
        const std::string lp = "level" + std::to_string(li);
        Level& level = levels[li];
        visit_layer_buffers(level.stem, lp + ".stem", fn);
        for (std::size_t b = 0; b < level.blocks.size(); ++b) {
            const std::string bp = lp + ".block" + std::to_string(b);
            visit_layer_buffers(level.blocks[b].diff, bp + ".diff", fn);
            visit_layer_buffers(level.blocks[b].mid, bp + ".mid", fn);
            visit_layer_buffers(level.blocks[b].pw, bp + ".pw", fn);
        }
        visit_layer_buffers(level.tpro.pw, lp + ".tpro.pw", fn);
    }
    visit_layer_buffers(head_fuse, "head.fuse", fn);
    visit_layer_buffers(head_out, "head.out", fn);
}

std::int64_t Model::parameter_count() {
    std::int64_t n = 0;
    visit_params([&](const std::string&, Tensor& t) { n += t.size(); });
    return n;
}

std::int64_t Model::scorm_parameter_count() {
    std::int64_t n = 0;
    visit_params([&](const std::string& name, Tensor& t) {
        if (name.find(".tpro.scorm") != std::string::npos) n += t.size();
    });
    return n;
}

std::int64_t Model::buffer_count() {
    std::int64_t n = 0;
    visit_buffers([&](const std::string&, std::vector<double>& b) { n += static_cast<std::int64_t>(b.size()); });
    return n;
}

void Model::zero_grads() {
    visit_params([](const std::string&, Tensor& t) { t.zero_grad(); });
}

namespace {
constexpr char kMagic[8] = {'D', 'P', 'P', 'T', '0', '0', '0', '1'};
}

void save_checkpoint(Model& model, const std::filesystem::path& path) {
    json header;
    header["format_version"] = 1;
    header["spec"] = json::parse(model.spec.to_json());
    header["tensors"] = json::array();

    std::vector<float> blob;
    model.visit_params([&](const std::string& name, Tensor& t) {
        header["tensors"].push_back({{"name", name}, {"shape", t.shape()}, {"kind", "param"}});
        for (double v : t.data()) blob.push_back(static_cast<float>(v));
    });
    model.visit_buffers([&](const std::string& name, std::vector<double>& b) {
        header["tensors"].push_back(
            {{"name", name}, {"shape", json::array({b.size()})}, {"kind", "buffer"}});
        for (double v : b) blob.push_back(static_cast<float>(v));
    });

    const std::string htext = header.dump();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write checkpoint " + path.string());
    f.write(kMagic, sizeof(kMagic));
    const std::uint64_t hlen = htext.size();
    f.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    f.write(htext.data(), static_cast<std::streamsize>(htext.size()));
    f.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size() * sizeof(float)));
    if (!f) throw std::runtime_error("short write to checkpoint " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint " + path.string());
    char magic[8];
    f.read(magic, sizeof(magic));
    if (!f || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error(path.string() + ": not a DPPT0001 checkpoint");
    std::uint64_t hlen = 0;
    f.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string htext(hlen, '\0');
    f.read(htext.data(), static_cast<std::streamsize>(hlen));
    if (!f) throw std::runtime_error(path.string() + ": truncated header");
    json header = json::parse(htext);
    if (header.at("format_version").get<int>() != 1)
        throw std::runtime_error(path.string() + ": unsupported checkpoint format version");

    Model model = build(ModelSpec::from_json(header.at("spec").dump()), /*seed=*/0);

    std::size_t expected = 0;
    for (const auto& jt : header.at("tensors")) {
        std::int64_t n = 1;
        for (const auto& d : jt.at("shape")) n *= d.get<std::int64_t>();
        expected += static_cast<std::size_t>(n);
    }
    std::vector<float> blob(expected);
    f.read(reinterpret_cast<char*>(blob.data()), static_cast<std::streamsize>(expected * sizeof(float)));
    if (!f) throw std::runtime_error(path.string() + ": truncated weight blob");

    std::size_t off = 0;
    std::size_t ti = 0;
    const auto& table = header.at("tensors");
    auto next_entry = [&](const std::string& name, std::int64_t n, const char* kind) {
        if (ti >= table.size()) throw std::runtime_error(path.string() + ": tensor table too short");
        const auto& jt = table[ti++];
        if (jt.at("name").get<std::string>() != name || jt.at("kind").get<std::string>() != kind)
            throw std::runtime_error(path.string() + ": tensor table mismatch at '" + name + "'");
        std::int64_t jn = 1;
        for (const auto& d : jt.at("shape")) jn *= d.get<std::int64_t>();
        if (jn != n) throw std::runtime_error(path.string() + ": shape mismatch for '" + name + "'");
    };
    model.visit_params([&](const std::string& name, Tensor& t) {
        next_entry(name, t.size(), "param");
        auto d = t.mutable_data();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = static_cast<double>(blob[off + i]);
        off += d.size();
    });
    model.visit_buffers([&](const std::string& name, std::vector<double>& b) {
        next_entry(name, static_cast<std::int64_t>(b.size()), "buffer");
        for (std::size_t i = 0; i < b.size(); ++i) b[i] = static_cast<double>(blob[off + i]);
        off += b.size();
    });
    if (off != expected || ti != table.size())
        throw std::runtime_error(path.string() + ": checkpoint does not match the rebuilt model");
    return model;
}

Tensor antitranspose(const Tensor& w) {
    if (w.dim() != 2 || w.extent(0) != w.extent(1)) throw ShapeError("antitranspose: square matrix required");
    const std::int64_t n = w.extent(0);
    Tensor out = Tensor::zeros(w.shape());
    auto o = out.mutable_data();
    const auto d = w.data();
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < n; ++j)
            o[static_cast<std::size_t>(i * n + j)] = d[static_cast<std::size_t>((n - 1 - j) * n + (n - 1 - i))];
    return out;
}

double minor_diagonal_symmetry_score(const Tensor& w) {
    Tensor a = antitranspose(w);
    const auto dw = w.data();
    const auto da = a.data();
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < dw.size(); ++i) {
        const double d = dw[i] - da[i];
        num += d * d;
        den += dw[i] * dw[i];
    }
    return den > 0.0 ? std::sqrt(num) / std::sqrt(den) : 0.0;
}

std::vector<ScormExport> export_scorms(const Model& model) {
    std::vector<ScormExport> out;
    for (std::size_t li = 0; li < model.levels.size(); ++li) {
        const auto& scorms = model.levels[li].tpro.scorms;
        for (std::size_t k = 0; k < scorms.size(); ++k) {
            ScormExport e;
            e.name = "level" + std::to_string(li) + "_scorm" + std::to_string(k);
            e.matrix = scorms[k].clone();
            e.symmetry_score = minor_diagonal_symmetry_score(scorms[k]);
            out.push_back(std::move(e));
        }
    }
    return out;
}

std::string scorm_csv(const Tensor& matrix) {
    const std::int64_t n = matrix.extent(0);
    std::string out;
    const auto d = matrix.data();
    char buf[64];
    for (std::int64_t i = 0; i < n; ++i) {
        for (std::int64_t j = 0; j < n; ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", d[static_cast<std::size_t>(i * n + j)]);
            out += buf;
            out += j + 1 < n ? ',' : '\n';
        }
    }
    return out;
}

FlopCount count_flops(const ModelSpec& spec, std::int64_t H, std::int64_t W) {
    spec.validate();
    FlopCount fc;
    const std::int64_t T = spec.T;
    const std::int64_t C = spec.channels;
    auto conv = [&](std::int64_t ci, std::int64_t co, std::int64_t taps, std::int64_t h, std::int64_t w,
                    bool bn, bool act) {
        const std::int64_t out_elems = co * T * h * w;
        fc.macs += out_elems * ci * taps;
        if (bn) fc.pointwise += 2 * out_elems;
        if (act) fc.pointwise += out_elems;
    };
    for (int p : spec.level_pools) {
        const std::int64_t h = H >> p, w = W >> p;
        fc.pointwise += 3 * (T * (H * W - h * w));  // the pooling pyramid, ~3 compares per output
        const std::int64_t stem_taps = static_cast<std::int64_t>(spec.stem_kt) * spec.stem_spatial * spec.stem_spatial;
        conv(1, C, stem_taps, h, w, true, true);
        for (int b = 0; b < spec.blocks_per_level; ++b) {
            if (spec.variant == Variant::DeepPro) {
                conv(C, C, spec.block_td_kt + 2, h, w, true, true);  // TD-Conv effective taps
                conv(C, C, spec.block_mid_kt, h, w, true, true);     // T-Conv
            } else {
                conv(C, C, static_cast<std::int64_t>(spec.block_mid_kt) * spec.block_mid_spatial * spec.block_mid_spatial,
                     h, w, true, true);  // SD-Conv
                conv(C, C, static_cast<std::int64_t>(spec.block_td_kt + 2) * spec.block_td_spatial * spec.block_td_spatial,
                     h, w, true, true);  // TD-Conv
            }
            conv(C, C, 1, h, w, true, true);  // P-Conv
            fc.pointwise += C * T * h * w;    // skip add
        }
        fc.macs += C * T * T * h * w;  // TPro SCorM transforms
        conv(C, C, 1, h, w, true, true);
        fc.pointwise += C * T * (H * W - h * w);  // upsample copies
    }
    conv(static_cast<std::int64_t>(spec.level_pools.size()) * C, C, 1, H, W, true, true);
    conv(C, 1, 1, H, W, false, false);
    fc.pointwise += T * H * W;  // head bias
    return fc;
}

}  // namespace tempro::net
