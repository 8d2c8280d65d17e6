#include "cplab/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

#include "cplab/digest.hpp"

namespace cplab::ckpt {

namespace {

constexpr char kMagic[4] = {'C', 'P', 'L', 'B'};

void put_u32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& buf, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

void put_f32(std::string& buf, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(buf, bits);
}

struct Reader {
    const std::string& buf;
    size_t pos = 0;
    const std::string& path;

    void need(size_t n) const {
        check(pos + n <= buf.size(), "checkpoint: '", path, "' is truncated");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    double f64() {
        need(8);
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i)
            bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i]))
                    << (8 * i);
        pos += 8;
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    float f32() {
        const std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    std::string bytes(size_t n) {
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

}  // namespace

std::string kind_to_string(ModelKind k) {
    switch (k) {
        case ModelKind::Backbone: return "backbone";
        case ModelKind::Control: return "control";
        case ModelKind::Detector: return "detector";
    }
    return "unknown";
}

void save_checkpoint(const std::string& path, const CheckpointMeta& meta,
                     const std::vector<std::pair<std::string, Tensor<float>>>& params) {
    std::string payload;
    for (const auto& [name, p] : params) {
        put_u32(payload, static_cast<std::uint32_t>(name.size()));
        payload += name;
        put_u32(payload, static_cast<std::uint32_t>(p.shape().size()));
        for (int e : p.shape()) put_u32(payload, static_cast<std::uint32_t>(e));
        for (float v : p.data()) put_f32(payload, v);
    }
    const std::string payload_digest = sha256_hex(payload.data(), payload.size());

    std::string head;
    head.append(kMagic, 4);
    put_u32(head, meta.version);
    put_u32(head, static_cast<std::uint32_t>(meta.kind));
    put_u32(head, static_cast<std::uint32_t>(meta.schedule_T));
    put_f64(head, meta.beta_start);
    put_f64(head, meta.beta_end);
    put_u32(head, static_cast<std::uint32_t>(meta.config_digest.size()));
    head += meta.config_digest;
    put_u32(head, static_cast<std::uint32_t>(payload_digest.size()));
    head += payload_digest;
    put_u32(head, static_cast<std::uint32_t>(params.size()));

    std::ofstream out(path, std::ios::binary);
    check(out.good(), "checkpoint: cannot write '", path, "'");
    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    check(out.good(), "checkpoint: write failed for '", path, "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    check(in.good(), "checkpoint: cannot open '", path, "'");
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    Reader r{buf, 0, path};
    check(r.bytes(4) == std::string(kMagic, 4), "checkpoint: '", path,
          "' has the wrong magic (not a CPLB file)");
    Checkpoint ck;
    ck.meta.version = r.u32();
    check(ck.meta.version == 1, "checkpoint: '", path, "' has unsupported version ",
          ck.meta.version);
    const std::uint32_t kind = r.u32();
    check(kind <= 2, "checkpoint: '", path, "' has unknown model kind ", kind);
    ck.meta.kind = static_cast<ModelKind>(kind);
    ck.meta.schedule_T = static_cast<int>(r.u32());
    ck.meta.beta_start = r.f64();
    ck.meta.beta_end = r.f64();
    ck.meta.config_digest = r.bytes(r.u32());
    const std::string stored_digest = r.bytes(r.u32());
    const std::uint32_t count = r.u32();

    const std::string payload = buf.substr(r.pos);
    check(sha256_hex(payload.data(), payload.size()) == stored_digest, "checkpoint: '", path,
          "' payload digest mismatch (corrupt or tampered file)");

    for (std::uint32_t i = 0; i < count; ++i) {
        NamedTensorData t;
        t.name = r.bytes(r.u32());
        const std::uint32_t rank = r.u32();
        check(rank <= 8, "checkpoint: '", path, "' tensor '", t.name, "' has rank ", rank);
        std::int64_t numel = 1;
        for (std::uint32_t d = 0; d < rank; ++d) {
            t.shape.push_back(static_cast<int>(r.u32()));
            numel *= t.shape.back();
        }
        t.values.resize(static_cast<size_t>(numel));
        for (auto& v : t.values) v = r.f32();
        ck.tensors.push_back(std::move(t));
    }
    check(r.pos == buf.size(), "checkpoint: '", path, "' has trailing bytes");
    return ck;
}

template <typename S>
void apply_to_params(const Checkpoint& ck,
                     std::vector<std::pair<std::string, Tensor<S>>> params) {
    std::map<std::string, const NamedTensorData*> by_name;
    for (const auto& t : ck.tensors) by_name[t.name] = &t;
    for (auto& [name, p] : params) {
        const auto it = by_name.find(name);
        check(it != by_name.end(), "checkpoint: parameter '", name, "' missing from file");
        const auto& t = *it->second;
        check(t.shape == p.shape(), "checkpoint: parameter '", name, "' has shape ",
              shape_str(t.shape), ", model expects ", shape_str(p.shape()));
        auto dst = p.data();
        for (size_t i = 0; i < t.values.size(); ++i) dst[i] = static_cast<S>(t.values[i]);
        by_name.erase(it);
    }
    check(by_name.empty(), "checkpoint: file carries ", by_name.size(),
          " tensors the model does not have");
}

template void apply_to_params<float>(const Checkpoint&,
                                     std::vector<std::pair<std::string, Tensor<float>>>);
template void apply_to_params<double>(const Checkpoint&,
                                      std::vector<std::pair<std::string, Tensor<double>>>);

}  // namespace cplab::ckpt
