#include "hoi/models.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "hoi/array_io.hpp"
#include "hoi/hashing.hpp"

namespace hoi {

using json = nlohmann::json;

TensorF batch_images(const std::vector<Image>& images, const NormStats& norm) {
    if (images.empty()) throw std::invalid_argument("batch_images: empty batch");
    const int c = images[0].c, h = images[0].h, w = images[0].w;
    if (static_cast<int>(norm.mean.size()) != c || static_cast<int>(norm.stddev.size()) != c)
        throw std::invalid_argument("batch_images: norm stats channel mismatch");
    TensorF out({static_cast<int>(images.size()), c, h, w});
    const size_t plane = static_cast<size_t>(h) * w;
    for (size_t i = 0; i < images.size(); ++i) {
        const Image& img = images[i];
        if (img.c != c || img.h != h || img.w != w)
            throw std::invalid_argument("batch_images: inconsistent image sizes");
        float* dst = out.v.data() + i * c * plane;
        for (int ch = 0; ch < c; ++ch) {
            const float m = norm.mean[ch];
            const float inv = 1.f / std::max(1e-6f, norm.stddev[ch]);
            const float* src = img.data.data() + static_cast<size_t>(ch) * plane;
            for (size_t j = 0; j < plane; ++j) dst[ch * plane + j] = (src[j] - m) * inv;
        }
    }
    return out;
}

std::string TrunkSpec::describe() const {
    std::ostringstream ss;
    ss << "trunk(in=" << in_channels << ",size=" << input_size << ",widths=";
    for (size_t i = 0; i < widths.size(); ++i) ss << (i ? "-" : "") << widths[i];
    ss << ",embed=" << embed_dim << ")";
    return ss.str();
}

void Trunk::build(const TrunkSpec& s, const std::string& name, Rng& rng) {
    spec = s;
    if (s.widths.empty()) throw std::invalid_argument("trunk: widths empty");
    convs.resize(s.widths.size());
    int in_c = s.in_channels;
    int size = s.input_size;
    for (size_t i = 0; i < s.widths.size(); ++i) {
        convs[i].configure(in_c, s.widths[i], 3, 2, 1, name + ".conv" + std::to_string(i), rng);
        in_c = s.widths[i];
        size = nn::conv_out_size(size, 3, 2, 1);
    }
    if (size < 1) throw std::invalid_argument("trunk: too many downsampling blocks");
    fc1.configure(s.widths.back(), s.embed_dim, name + ".fc1", rng);
    fc2.configure(s.embed_dim, s.embed_dim, name + ".fc2", rng);
}

TensorF Trunk::forward(const TensorF& x, TrunkCache* cache) const {
    if (x.shape.size() != 4 || x.dim(1) != spec.in_channels || x.dim(2) != spec.input_size ||
        x.dim(3) != spec.input_size)
        throw std::invalid_argument("trunk: input must be [N," + std::to_string(spec.in_channels) +
                                    "," + std::to_string(spec.input_size) + "," +
                                    std::to_string(spec.input_size) + "]");
    if (cache) {
        cache->conv.resize(convs.size());
        cache->relu.resize(convs.size());
    }
    TensorF h = x;
    for (size_t i = 0; i < convs.size(); ++i) {
        h = convs[i].forward(h, cache ? &cache->conv[i] : nullptr);
        h = relu.forward(h, cache ? &cache->relu[i] : nullptr);
    }
    h = gap.forward(h, cache ? &cache->gap : nullptr);
    h = fc1.forward(h, cache ? &cache->fc1 : nullptr);
    h = relu.forward(h, cache ? &cache->fc_relu : nullptr);
    return fc2.forward(h, cache ? &cache->fc2 : nullptr);
}

void Trunk::backward(const TensorF& d_embed, TrunkCache& cache) {
    TensorF d = fc2.backward(d_embed, cache.fc2);
    d = relu.backward(d, cache.fc_relu);
    d = fc1.backward(d, cache.fc1);
    d = gap.backward(d, cache.gap);
    for (int i = static_cast<int>(convs.size()) - 1; i >= 0; --i) {
        d = relu.backward(d, cache.relu[i]);
        d = convs[i].backward(d, cache.conv[i]);
    }
}

void Trunk::collect(std::vector<nn::Param<float>*>& out) {
    for (auto& c : convs) {
        out.push_back(&c.w);
        out.push_back(&c.b);
    }
    out.push_back(&fc1.w);
    out.push_back(&fc1.b);
    out.push_back(&fc2.w);
    out.push_back(&fc2.b);
}

void ProjectionHead::build(int in_dim, int hidden, int out_dim, const std::string& name,
                           Rng& rng) {
    l1.configure(in_dim, hidden, name + ".l1", rng);
    l2.configure(hidden, hidden, name + ".l2", rng);
    l3.configure(hidden, out_dim, name + ".l3", rng);
}

TensorF ProjectionHead::forward(const TensorF& x, HeadCache* cache) const {
    TensorF h = l1.forward(x, cache ? &cache->c1 : nullptr);
    h = relu.forward(h, cache ? &cache->r1 : nullptr);
    h = l2.forward(h, cache ? &cache->c2 : nullptr);
    h = relu.forward(h, cache ? &cache->r2 : nullptr);
    return l3.forward(h, cache ? &cache->c3 : nullptr);
}

TensorF ProjectionHead::backward(const TensorF& dy, HeadCache& cache) {
    TensorF d = l3.backward(dy, cache.c3);
    d = relu.backward(d, cache.r2);
    d = l2.backward(d, cache.c2);
    d = relu.backward(d, cache.r1);
    return l1.backward(d, cache.c1);
}

void ProjectionHead::collect(std::vector<nn::Param<float>*>& out) {
    out.push_back(&l1.w);
    out.push_back(&l1.b);
    out.push_back(&l2.w);
    out.push_back(&l2.b);
    out.push_back(&l3.w);
    out.push_back(&l3.b);
}

void ObjectModel::build(const TrunkSpec& spec, uint64_t seed) {
    Rng rng(seed, 101);
    trunk.build(spec, "phi_o", rng);
    f_o.build(spec.embed_dim, 512, 128, "f_o", rng);
    f_h.build(spec.embed_dim, 512, 128, "f_h", rng);
}

void ObjectModel::collect(std::vector<nn::Param<float>*>& out) {
    trunk.collect(out);
    f_o.collect(out);
    f_h.collect(out);
}

void HandModel::build(const TrunkSpec& spec, uint64_t seed) {
    Rng rng(seed, 202);
    trunk.build(spec, "phi_h", rng);
    fuse.configure(spec.embed_dim + kPeDim, spec.embed_dim, "pe_fuse", rng);
    g_h.build(spec.embed_dim, 512, 128, "g_h", rng);
}

TensorF HandModel::forward(const TensorF& crops, const TensorF& pe, HandModelCache* cache) const {
    if (pe.shape.size() != 2 || pe.dim(1) != kPeDim)
        throw std::invalid_argument("hand model: positional encoding must be [N,288]");
    if (pe.dim(0) != crops.dim(0))
        throw std::invalid_argument("hand model: crop/pe batch mismatch");
    TensorF e = trunk.forward(crops, cache ? &cache->trunk : nullptr);
    const int n = e.dim(0), d = e.dim(1);
    TensorF cat({n, d + kPeDim});
    for (int i = 0; i < n; ++i) {
        std::copy_n(e.v.data() + static_cast<size_t>(i) * d, d,
                    cat.v.data() + static_cast<size_t>(i) * (d + kPeDim));
        std::copy_n(pe.v.data() + static_cast<size_t>(i) * kPeDim, kPeDim,
                    cat.v.data() + static_cast<size_t>(i) * (d + kPeDim) + d);
    }
    TensorF fused = fuse.forward(cat, cache ? &cache->fuse : nullptr);
    if (cache) cache->n = n;
    return g_h.forward(fused, cache ? &cache->g_h : nullptr);
}

void HandModel::backward(const TensorF& d_out, HandModelCache& cache) {
    TensorF d_fused = g_h.backward(d_out, cache.g_h);
    TensorF d_cat = fuse.backward(d_fused, cache.fuse);
    const int d = trunk.spec.embed_dim;
    TensorF d_embed({cache.n, d});
    for (int i = 0; i < cache.n; ++i)
        std::copy_n(d_cat.v.data() + static_cast<size_t>(i) * (d + kPeDim), d,
                    d_embed.v.data() + static_cast<size_t>(i) * d);
    trunk.backward(d_embed, cache.trunk);
}

void HandModel::collect(std::vector<nn::Param<float>*>& out) {
    trunk.collect(out);
    out.push_back(&fuse.w);
    out.push_back(&fuse.b);
    g_h.collect(out);
}

std::string AcpSpec::describe() const {
    std::ostringstream ss;
    ss << "acp(in=" << in_channels << ",size=" << input_size << ",enc=";
    for (size_t i = 0; i < enc_widths.size(); ++i) ss << (i ? "-" : "") << enc_widths[i];
    ss << ",dec=";
    for (size_t i = 0; i < dec_widths.size(); ++i) ss << (i ? "-" : "") << dec_widths[i];
    ss << ",ghidden=" << grasp_hidden << ",G=" << grasp_classes << ")";
    return ss.str();
}

void AcpModel::build(const AcpSpec& s, uint64_t seed) {
    spec = s;
    Rng rng(seed, 303);
    enc.resize(s.enc_widths.size());
    int in_c = s.in_channels;
    for (size_t i = 0; i < s.enc_widths.size(); ++i) {
        enc[i].configure(in_c, s.enc_widths[i], 3, 2, 1, "acp.enc" + std::to_string(i), rng);
        in_c = s.enc_widths[i];
    }
    // 4 transposed-conv layers, kernel 4, stride 2, pad 1: spatial 4 -> 64
    std::vector<int> dec_out = s.dec_widths;
    dec_out.push_back(1);
    dec.resize(dec_out.size());
    int dc = in_c;
    for (size_t i = 0; i < dec_out.size(); ++i) {
        dec[i].configure(dc, dec_out[i], 4, 2, 1, "acp.dec" + std::to_string(i), rng);
        dc = dec_out[i];
    }
    g1.configure(in_c, s.grasp_hidden, "acp.g1", rng);
    g2.configure(s.grasp_hidden, s.grasp_classes, "acp.g2", rng);
}

AcpForward AcpModel::forward(const TensorF& x, AcpCache* cache) const {
    if (x.shape.size() != 4 || x.dim(1) != spec.in_channels || x.dim(2) != spec.input_size ||
        x.dim(3) != spec.input_size)
        throw std::invalid_argument("acp: input must be [N,3," + std::to_string(spec.input_size) +
                                    "," + std::to_string(spec.input_size) + "]");
    if (cache) {
        cache->enc_conv.resize(enc.size());
        cache->enc_relu.resize(enc.size());
        cache->dec.resize(dec.size());
        cache->dec_relu.resize(dec.size() - 1);
    }
    TensorF h = x;
    for (size_t i = 0; i < enc.size(); ++i) {
        h = enc[i].forward(h, cache ? &cache->enc_conv[i] : nullptr);
        h = relu.forward(h, cache ? &cache->enc_relu[i] : nullptr);
    }
    if (cache) cache->enc_out = h;

    AcpForward out;
    TensorF d = h;
    for (size_t i = 0; i < dec.size(); ++i) {
        d = dec[i].forward(d, cache ? &cache->dec[i] : nullptr);
        if (i + 1 < dec.size()) d = relu.forward(d, cache ? &cache->dec_relu[i] : nullptr);
    }
    out.seg_logits = std::move(d);

    TensorF p = gap.forward(h, cache ? &cache->gap : nullptr);
    p = g1.forward(p, cache ? &cache->g1 : nullptr);
    p = relu.forward(p, cache ? &cache->g_relu : nullptr);
    out.grasp_logits = g2.forward(p, cache ? &cache->g2 : nullptr);
    return out;
}

void AcpModel::backward(const TensorF& d_seg, const TensorF& d_grasp, AcpCache& cache) {
    TensorF d = d_seg;
    for (int i = static_cast<int>(dec.size()) - 1; i >= 0; --i) {
        if (i + 1 < static_cast<int>(dec.size())) d = relu.backward(d, cache.dec_relu[i]);
        d = dec[i].backward(d, cache.dec[i]);
    }
    TensorF dg = g2.backward(d_grasp, cache.g2);
    dg = relu.backward(dg, cache.g_relu);
    dg = g1.backward(dg, cache.g1);
    TensorF dg_map = gap.backward(dg, cache.gap);
    for (size_t i = 0; i < d.v.size(); ++i) d.v[i] += dg_map.v[i];

    for (int i = static_cast<int>(enc.size()) - 1; i >= 0; --i) {
        d = relu.backward(d, cache.enc_relu[i]);
        d = enc[i].backward(d, cache.enc_conv[i]);
    }
}

void AcpModel::collect(std::vector<nn::Param<float>*>& out) {
    for (auto& c : enc) {
        out.push_back(&c.w);
        out.push_back(&c.b);
    }
    for (auto& c : dec) {
        out.push_back(&c.w);
        out.push_back(&c.b);
    }
    out.push_back(&g1.w);
    out.push_back(&g1.b);
    out.push_back(&g2.w);
    out.push_back(&g2.b);
}

TensorF encode_object(const ObjectModel& m, const std::vector<Image>& crops,
                      const NormStats& norm) {
    return m.trunk.forward(batch_images(crops, norm), nullptr);
}

TensorF project_f_o(const ObjectModel& m, const TensorF& embed) {
    return m.f_o.forward(embed, nullptr);
}

TensorF project_f_h(const ObjectModel& m, const TensorF& embed) {
    return m.f_h.forward(embed, nullptr);
}

TensorF encode_hand(const HandModel& m, const std::vector<Image>& crops,
                    const std::vector<std::array<double, 288>>& pes, const NormStats& norm) {
    if (crops.size() != pes.size())
        throw std::invalid_argument("encode_hand: crop/pe count mismatch");
    TensorF pe({static_cast<int>(pes.size()), HandModel::kPeDim});
    for (size_t i = 0; i < pes.size(); ++i)
        for (int j = 0; j < HandModel::kPeDim; ++j)
            pe.v[i * HandModel::kPeDim + j] = static_cast<float>(pes[i][j]);
    return m.forward(batch_images(crops, norm), pe, nullptr);
}

AcpForward acp_forward(const AcpModel& m, const std::vector<Image>& contexts,
                       const NormStats& norm) {
    return m.forward(batch_images(contexts, norm), nullptr);
}

// ---- checkpoints ----

void save_checkpoint(const std::string& base, const std::string& kind,
                     const std::string& spec_describe, uint64_t seed, const NormStats& norm,
                     const std::vector<nn::Param<float>*>& params,
                     const std::map<std::string, std::string>& extra) {
    std::vector<NamedArray> arrays;
    arrays.reserve(params.size());
    for (const auto* p : params) {
        NamedArray na;
        na.name = p->name;
        na.array.dims.assign(p->value.shape.begin(), p->value.shape.end());
        na.array.data.assign(p->value.v.begin(), p->value.v.end());
        arrays.push_back(std::move(na));
    }
    write_array_bundle(base + ".weights", arrays);

    json j;
    j["format"] = 1;
    j["kind"] = kind;
    j["spec"] = spec_describe;
    j["spec_hash"] = hash_bytes(spec_describe);
    j["seed"] = seed;
    j["norm_mean"] = norm.mean;
    j["norm_std"] = norm.stddev;
    j["weights_hash"] = hash_file(base + ".weights");
    j["extra"] = extra;
    std::ofstream f(base + ".json", std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("checkpoint: cannot write " + base + ".json");
    f << j.dump(2) << "\n";
}

CheckpointMeta read_checkpoint_meta(const std::string& base) {
    std::ifstream f(base + ".json");
    if (!f) throw std::runtime_error("checkpoint: cannot open " + base + ".json");
    json j;
    f >> j;
    CheckpointMeta meta;
    meta.kind = j.at("kind").get<std::string>();
    meta.spec = j.at("spec").get<std::string>();
    meta.spec_hash = j.at("spec_hash").get<std::string>();
    meta.seed = j.at("seed").get<uint64_t>();
    meta.norm.mean = j.at("norm_mean").get<std::vector<float>>();
    meta.norm.stddev = j.at("norm_std").get<std::vector<float>>();
    if (j.contains("extra"))
        meta.extra = j["extra"].get<std::map<std::string, std::string>>();
    return meta;
}

CheckpointMeta load_checkpoint(const std::string& base, const std::string& expected_kind,
                               const std::string& expected_spec,
                               const std::vector<nn::Param<float>*>& params) {
    CheckpointMeta meta = read_checkpoint_meta(base);
    if (meta.kind != expected_kind)
        throw std::runtime_error("checkpoint: kind mismatch: have " + meta.kind + ", want " +
                                 expected_kind);
    if (meta.spec != expected_spec)
        throw std::runtime_error("checkpoint: spec mismatch: have '" + meta.spec + "', want '" +
                                 expected_spec + "'");
    auto arrays = read_array_bundle(base + ".weights");
    if (arrays.size() != params.size())
        throw std::runtime_error("checkpoint: parameter count mismatch");
    for (size_t i = 0; i < params.size(); ++i) {
        if (arrays[i].name != params[i]->name)
            throw std::runtime_error("checkpoint: parameter name mismatch at " + arrays[i].name);
        if (arrays[i].array.numel() != params[i]->value.numel())
            throw std::runtime_error("checkpoint: parameter size mismatch at " + arrays[i].name);
        params[i]->value.v.assign(arrays[i].array.data.begin(), arrays[i].array.data.end());
    }
    return meta;
}

}  // namespace hoi
