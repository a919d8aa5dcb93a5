#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "tempro/nn_ops.hpp"
#include "tempro/tensor.hpp"

namespace tempro::net {

enum class Variant { DeepPro, DeepProPlus };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

/// Declarative network configuration; fully reconstructs a model together
/// with a weight blob.
struct ModelSpec {
    Variant variant = Variant::DeepPro;
    int T = 40;        // input frame count (SCorM side)
    int m = 4;         // SCorMs per TPro
    int channels = 20; // base channel count C per level
    std::vector<int> level_pools = {0, 1, 2};  // spatial max-pool count per level
    int blocks_per_level = 2;

    // Stem layer geometry (T-Conv for DeepPro, SD-Conv for DeepPro-Plus).
    int stem_kt = 5;
    int stem_spatial = 1;
    // Residual block geometry.
    int block_td_kt = 3;
    int block_td_spatial = 1;
    int block_td_dilation = 2;       // temporal dilation of TD-Conv
    int block_mid_kt = 3;            // T-Conv (DeepPro) / SD-Conv (Plus)
    int block_mid_spatial = 1;
    int block_mid_spatial_dilation = 1;

    static ModelSpec deeppro(int T = 40, int channels = 20, int m = 4);
    static ModelSpec deeppro_plus(int T = 40, int channels = 32, int m = 8);

    void validate() const;
    int max_pool_count() const;
    std::string to_json() const;
    static ModelSpec from_json(const std::string& text);
};

enum class ConvKind { Plain, TimeDiff, SpaceDiff };

/// Convolution layer: conv (+ optional bias) + optional BN + optional ReLU.
struct ConvLayer {
    ConvKind kind = ConvKind::Plain;
    Dilation3 dilation{};
    Tensor weight;  // [Co,Ci,kt,kh,kw]; raw taps for TimeDiff/SpaceDiff
    Tensor bias;    // undefined when absent
    bool has_bn = true;
    bool has_relu = true;
    Tensor gamma, beta;
    BnBuffers bn;

    Tensor forward(Tape& tape, const Tensor& x, bool training, std::vector<BnUpdate>* updates) const;
    std::int64_t out_channels() const { return weight.extent(0); }
};

/// TD-ResBlock (DeepPro) / STD-ResBlock (DeepPro-Plus):
/// x + pw(mid(diff(x))).
struct ResBlock {
    ConvLayer diff;  // TD-Conv (DeepPro) or SD-Conv (Plus, the leading layer)
    ConvLayer mid;   // T-Conv (DeepPro) or TD-Conv 3x3x3 (Plus)
    ConvLayer pw;    // P-Conv
    Tensor forward(Tape& tape, const Tensor& x, bool training, std::vector<BnUpdate>* updates) const;
};

/// Temporal probe mechanism: channel split, per-group SCorM transform,
/// concatenation, pointwise fusion.
struct TProBlock {
    std::vector<Tensor> scorms;  // m learnable [T,T] matrices
    ConvLayer pw;
    Tensor forward(Tape& tape, const Tensor& x, bool training, std::vector<BnUpdate>* updates) const;
};

struct Level {
    int pool_count = 0;
    ConvLayer stem;
    std::vector<ResBlock> blocks;
    TProBlock tpro;
};

struct Model {
    ModelSpec spec;
    std::vector<Level> levels;
    ConvLayer head_fuse;  // P-Conv C_total -> C
    ConvLayer head_out;   // plain 1x1x1 conv C -> 1 with bias, no BN/ReLU

    /// Visits every learnable tensor in a fixed order.
    void visit_params(const std::function<void(const std::string&, Tensor&)>& fn);
    /// Visits every BN running-statistics array in the same fixed order.
    void visit_buffers(const std::function<void(const std::string&, std::vector<double>&)>& fn);

    std::int64_t parameter_count();        // learnable values
    std::int64_t scorm_parameter_count();  // subset held by SCorMs
    std::int64_t buffer_count();           // BN running statistics
    void zero_grads();
};

/// Deterministic build: Kaiming-normal convolution weights, identity-plus-
/// noise SCorMs, neutral batch norms.
Model build(const ModelSpec& spec, std::uint64_t seed);

/// Runs the network on S [L,H,W] with L <= spec.T (shorter inputs are
/// zero-padded in time). Returns logits [T,H,W]. Training mode normalizes
/// with batch statistics and appends running-stat updates to `updates`.
Tensor forward(Tape& tape, const Model& model, const Tensor& s, bool training,
               std::vector<BnUpdate>* updates = nullptr);

/// Eval-mode confidence map sigmoid(logits) as a plain tensor.
Tensor predict(const Model& model, const Tensor& s);

/// Turns off requires_grad on every parameter for the guard's lifetime, so
/// eval passes record nothing and concurrent backward passes (e.g. attribution
/// steps) never touch shared parameter gradients.
class ParamGradGuard {
 public:
    explicit ParamGradGuard(Model& model);
    ~ParamGradGuard();
    ParamGradGuard(const ParamGradGuard&) = delete;
    ParamGradGuard& operator=(const ParamGradGuard&) = delete;

 private:
    std::vector<Tensor> flipped_;
};

// --- Checkpoint file (.dppt): 8-byte magic "DPPT0001", u64 little-endian
// header length, JSON header {format_version, spec, tensors[]}, then the
// tensors' f32 blobs concatenated in header order (BN statistics included).
void save_checkpoint(Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

/// Antitranspose (mirror about the minor diagonal) of a square matrix.
Tensor antitranspose(const Tensor& w);
/// ||W - antitranspose(W)||_F / ||W||_F; 0 for an exactly symmetric matrix.
double minor_diagonal_symmetry_score(const Tensor& w);

struct ScormExport {
    std::string name;
    Tensor matrix;
    double symmetry_score;
};
std::vector<ScormExport> export_scorms(const Model& model);
std::string scorm_csv(const Tensor& matrix);

/// Analytic multiply-accumulate / pointwise-op counts of one eval forward
/// pass on a [T,H,W] input.
struct FlopCount {
    std::int64_t macs = 0;       // fused multiply-adds
    std::int64_t pointwise = 0;  // BN/ReLU/add/pool element ops
    double flops(int macs_per_fma) const {
        return static_cast<double>(macs) * macs_per_fma + static_cast<double>(pointwise);
    }
};
FlopCount count_flops(const ModelSpec& spec, std::int64_t H, std::int64_t W);

}  // namespace tempro::net
