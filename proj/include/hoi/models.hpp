#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "hoi/image.hpp"
#include "hoi/nn.hpp"
#include "hoi/rng.hpp"

namespace hoi {

using nn::TensorF;

// Channel normalization applied to crops before any encoder.
struct NormStats {
    std::vector<float> mean = {0.5f, 0.5f, 0.5f};
    std::vector<float> stddev = {0.25f, 0.25f, 0.25f};
};

// Stack images (all same CHW) into an NCHW batch, normalizing per channel.
TensorF batch_images(const std::vector<Image>& images, const NormStats& norm);

// ---- small convolutional trunk: [conv s2 + relu] x B, GAP, fc-relu-fc ----

struct TrunkSpec {
    int in_channels = 3;
    int input_size = 64;
    std::vector<int> widths = {16, 32, 64, 128};
    int embed_dim = 512;

    std::string describe() const;
};

struct TrunkCache {
    std::vector<nn::Conv2d<float>::Cache> conv;
    std::vector<nn::Relu<float>::Cache> relu;
    nn::GlobalAvgPool<float>::Cache gap;
    nn::Linear<float>::Cache fc1;
    nn::Relu<float>::Cache fc_relu;
    nn::Linear<float>::Cache fc2;
};

struct Trunk {
    TrunkSpec spec;
    std::vector<nn::Conv2d<float>> convs;
    nn::Relu<float> relu;
    nn::GlobalAvgPool<float> gap;
    nn::Linear<float> fc1, fc2;

    void build(const TrunkSpec& s, const std::string& name, Rng& rng);
    TensorF forward(const TensorF& x, TrunkCache* cache) const;  // -> [N, embed_dim]
    void backward(const TensorF& d_embed, TrunkCache& cache);
    void collect(std::vector<nn::Param<float>*>& out);
};

// SimCLR-style projection head: 512 -> 512 -> 128 with relu between layers.
struct HeadCache {
    nn::Linear<float>::Cache c1, c2, c3;
    nn::Relu<float>::Cache r1, r2;
};

struct ProjectionHead {
    nn::Linear<float> l1, l2, l3;
    nn::Relu<float> relu;

    void build(int in_dim, int hidden, int out_dim, const std::string& name, Rng& rng);
    TensorF forward(const TensorF& x, HeadCache* cache) const;
    TensorF backward(const TensorF& dy, HeadCache& cache);
    void collect(std::vector<nn::Param<float>*>& out);
};

// ---- object model: trunk phi_o with heads f_o (temporal) and f_h (object-hand) ----

struct ObjectModelCache {
    TrunkCache trunk;
    HeadCache f_o, f_h;
    TensorF embed;
};

struct ObjectModel {
    Trunk trunk;
    ProjectionHead f_o, f_h;

    void build(const TrunkSpec& spec, uint64_t seed);
    void collect(std::vector<nn::Param<float>*>& out);
};

// ---- hand model: trunk phi_h, positional-encoding fusion, head g_h ----

struct HandModelCache {
    TrunkCache trunk;
    nn::Linear<float>::Cache fuse;
    HeadCache g_h;
    int n = 0;
};

struct HandModel {
    Trunk trunk;
    nn::Linear<float> fuse;  // concat(embed, pe[288]) -> embed_dim
    ProjectionHead g_h;
    static constexpr int kPeDim = 288;

    void build(const TrunkSpec& spec, uint64_t seed);
    // pe rows must have length 288; output is the g_h projection.
    TensorF forward(const TensorF& crops, const TensorF& pe, HandModelCache* cache) const;
    void backward(const TensorF& d_out, HandModelCache& cache);
    void collect(std::vector<nn::Param<float>*>& out);
};

// ---- ACP model: encoder + deconv segmentation head + grasp head ----

struct AcpSpec {
    int in_channels = 3;
    int input_size = 128;
    std::vector<int> enc_widths = {16, 32, 64, 128, 128};
    std::vector<int> dec_widths = {64, 32, 16};  // final 1-channel layer appended
    int grasp_hidden = 128;
    int grasp_classes = 8;

    std::string describe() const;
};

struct AcpForward {
    TensorF seg_logits;    // [N, 1, 64, 64]
    TensorF grasp_logits;  // [N, G]
};

struct AcpCache {
    std::vector<nn::Conv2d<float>::Cache> enc_conv;
    std::vector<nn::Relu<float>::Cache> enc_relu;
    std::vector<nn::ConvTranspose2d<float>::Cache> dec;
    std::vector<nn::Relu<float>::Cache> dec_relu;
    nn::GlobalAvgPool<float>::Cache gap;
    nn::Linear<float>::Cache g1, g2;
    nn::Relu<float>::Cache g_relu;
    TensorF enc_out;
};

struct AcpModel {
    AcpSpec spec;
    std::vector<nn::Conv2d<float>> enc;
    std::vector<nn::ConvTranspose2d<float>> dec;
    nn::Relu<float> relu;
    nn::GlobalAvgPool<float> gap;
    nn::Linear<float> g1, g2;

    void build(const AcpSpec& s, uint64_t seed);
    AcpForward forward(const TensorF& x, AcpCache* cache) const;
    void backward(const TensorF& d_seg, const TensorF& d_grasp, AcpCache& cache);
    void collect(std::vector<nn::Param<float>*>& out);
};

// ---- inference helpers (eval-mode, deterministic) ----

TensorF encode_object(const ObjectModel& m, const std::vector<Image>& crops,
                      const NormStats& norm);                       // [N, 512]
TensorF project_f_o(const ObjectModel& m, const TensorF& embed);    // [N, 128]
TensorF project_f_h(const ObjectModel& m, const TensorF& embed);    // [N, 128]
TensorF encode_hand(const HandModel& m, const std::vector<Image>& crops,
                    const std::vector<std::array<double, 288>>& pes, const NormStats& norm);
AcpForward acp_forward(const AcpModel& m, const std::vector<Image>& contexts,
                       const NormStats& norm);

// ---- checkpoints: <base>.weights (tensor bundle) + <base>.json (manifest) ----

struct CheckpointMeta {
    std::string kind;       // object_model | hand_model | acp_model
    std::string spec;       // canonical spec description
    std::string spec_hash;
    uint64_t seed = 0;
    NormStats norm;
    std::map<std::string, std::string> extra;
};

void save_checkpoint(const std::string& base, const std::string& kind,
                     const std::string& spec_describe, uint64_t seed, const NormStats& norm,
                     const std::vector<nn::Param<float>*>& params,
                     const std::map<std::string, std::string>& extra = {});
CheckpointMeta load_checkpoint(const std::string& base, const std::string& expected_kind,
                               const std::string& expected_spec,
                               const std::vector<nn::Param<float>*>& params);
CheckpointMeta read_checkpoint_meta(const std::string& base);

}  // namespace hoi
