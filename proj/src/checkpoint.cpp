#include "bessctl/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "bessctl/common.hpp"

namespace bessctl {

namespace {

void put_f32_le(std::string& buf, float f) {
    uint32_t u = std::bit_cast<uint32_t>(f);
    buf.push_back(static_cast<char>(u & 0xff));
    buf.push_back(static_cast<char>((u >> 8) & 0xff));
    buf.push_back(static_cast<char>((u >> 16) & 0xff));
    buf.push_back(static_cast<char>((u >> 24) & 0xff));
}

float get_f32_le(const char* p) {
    uint32_t u = static_cast<uint8_t>(p[0]) | (static_cast<uint32_t>(static_cast<uint8_t>(p[1])) << 8) |
                 (static_cast<uint32_t>(static_cast<uint8_t>(p[2])) << 16) |
                 (static_cast<uint32_t>(static_cast<uint8_t>(p[3])) << 24);
    return std::bit_cast<float>(u);
}

}  // namespace

ad::TensorPtr Checkpoint::find(const std::string& name) const {
    for (const auto& e : entries) {
        if (e.name == name) return e.tensor;
    }
    return nullptr;
}

void save_checkpoint(const std::string& path, const nlohmann::json& config,
                     const std::vector<CheckpointEntry>& entries) {
    nlohmann::json header;
    header["config"] = config;
    nlohmann::json tens = nlohmann::json::array();
    uint64_t off = 0;
    for (const auto& e : entries) {
        nlohmann::json t;
        t["name"] = e.name;
        t["shape"] = e.tensor->shape;
        t["offset"] = off;
        t["nbytes"] = e.tensor->values.size() * 4;
        t["trainable"] = e.trainable;
        tens.push_back(t);
        off += e.tensor->values.size() * 4;
    }
    header["tensors"] = tens;

    // the declared payload offset appears inside the header itself; iterate
    // until the length is consistent, padding with spaces before the newline
    uint64_t payload_offset = 0;
    std::string line;
    for (int iter = 0; iter < 8; ++iter) {
        header["payload_offset"] = payload_offset;
        line = header.dump();
        uint64_t need = line.size() + 1;
        if (need <= payload_offset) break;
        payload_offset = need;
    }
    line.append(payload_offset - 1 - line.size(), ' ');
    line.push_back('\n');

    std::string payload;
    payload.reserve(off);
    for (const auto& e : entries) {
        for (float f : e.tensor->values) put_f32_le(payload, f);
    }

    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("save_checkpoint: cannot open '" + path + "' for writing");
    f.write(line.data(), static_cast<std::streamsize>(line.size()));
    f.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!f) throw DataError("save_checkpoint: write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("load_checkpoint: cannot open '" + path + "'");
    std::string line;
    if (!std::getline(f, line)) throw DataError("load_checkpoint: '" + path + "' has no header line");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("load_checkpoint: bad header in '" + path + "': " + e.what());
    }
    if (!header.contains("payload_offset") || !header.contains("tensors")) {
        throw DataError("load_checkpoint: header of '" + path + "' misses payload_offset/tensors");
    }

    Checkpoint ck;
    ck.config = header.value("config", nlohmann::json::object());
    uint64_t payload_offset = header["payload_offset"].get<uint64_t>();

    for (const auto& t : header["tensors"]) {
        std::string name = t.at("name").get<std::string>();
        ad::Shape shape = t.at("shape").get<ad::Shape>();
        uint64_t off = t.at("offset").get<uint64_t>();
        uint64_t nbytes = t.at("nbytes").get<uint64_t>();
        int64_t numel = ad::shape_numel(shape);
        if (nbytes != static_cast<uint64_t>(numel) * 4) {
            throw DataError("load_checkpoint: tensor '" + name + "' nbytes does not match shape");
        }
        f.clear();
        f.seekg(static_cast<std::streamoff>(payload_offset + off));
        std::vector<char> raw(nbytes);
        f.read(raw.data(), static_cast<std::streamsize>(nbytes));
        if (f.gcount() != static_cast<std::streamsize>(nbytes)) {
            throw DataError("load_checkpoint: '" + path + "' truncated while reading tensor '" + name + "'");
        }
        std::vector<float> vals(static_cast<size_t>(numel));
        for (int64_t i = 0; i < numel; ++i) vals[i] = get_f32_le(raw.data() + i * 4);
        CheckpointEntry e;
        e.name = std::move(name);
        e.tensor = ad::make_tensor(shape, std::move(vals));
        e.trainable = t.value("trainable", true);
        ck.entries.push_back(std::move(e));
    }
    return ck;
}

}  // namespace bessctl
