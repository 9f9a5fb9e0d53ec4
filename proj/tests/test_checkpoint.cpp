#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "bessctl/checkpoint.hpp"
#include "bessctl/common.hpp"

using namespace bessctl;

TEST_CASE("checkpoint round trip preserves config, order, shapes and bits") {
    nlohmann::json cfg = {{"kind", "test"}, {"n_layers", 2}, {"lr", 1e-4}};
    std::vector<CheckpointEntry> entries;
    entries.push_back({"blk.w", ad::make_tensor({2, 3}, {1.5f, -2.25f, 0.0f, 3.0f, -0.125f, 7.0f}), true});
    entries.push_back({"norm.mean", ad::make_tensor({4}, {0.1f, 0.2f, 0.3f, 0.4f}), false});

    std::string path = "ckpt_roundtrip.bin";
    save_checkpoint(path, cfg, entries);
    auto ck = load_checkpoint(path);

    CHECK(ck.config["kind"] == "test");
    CHECK(ck.config["n_layers"] == 2);
    REQUIRE(ck.entries.size() == 2);
    CHECK(ck.entries[0].name == "blk.w");
    CHECK(ck.entries[0].tensor->shape == ad::Shape{2, 3});
    CHECK(ck.entries[0].tensor->values == entries[0].tensor->values);
    CHECK(ck.entries[0].trainable);
    CHECK_FALSE(ck.entries[1].trainable);
    CHECK(ck.find("norm.mean")->values[2] == 0.3f);
    CHECK(ck.find("missing") == nullptr);
    std::remove(path.c_str());
}

TEST_CASE("checkpoint header is one JSON line and payload starts at the declared offset") {
    std::vector<CheckpointEntry> entries;
    entries.push_back({"w", ad::make_tensor({1}, {2.0f}), true});
    std::string path = "ckpt_header.bin";
    save_checkpoint(path, nlohmann::json::object(), entries);

    std::ifstream f(path, std::ios::binary);
    std::string line;
    std::getline(f, line);
    auto header = nlohmann::json::parse(line);
    size_t off = header["payload_offset"].get<size_t>();
    CHECK(off == line.size() + 1);
    f.seekg(static_cast<std::streamoff>(off));
    char raw[4];
    f.read(raw, 4);
    // 2.0f little-endian
    CHECK(static_cast<uint8_t>(raw[0]) == 0x00);
    CHECK(static_cast<uint8_t>(raw[1]) == 0x00);
    CHECK(static_cast<uint8_t>(raw[2]) == 0x00);
    CHECK(static_cast<uint8_t>(raw[3]) == 0x40);
    std::remove(path.c_str());
}

TEST_CASE("corrupt and truncated checkpoints are rejected") {
    std::string path = "ckpt_bad.bin";
    {
        std::ofstream f(path, std::ios::binary);
        f << "{not json\n";
    }
    CHECK_THROWS_AS(load_checkpoint(path), DataError);

    std::vector<CheckpointEntry> entries;
    entries.push_back({"w", ad::make_tensor({8}, std::vector<float>(8, 1.0f)), true});
    save_checkpoint(path, nlohmann::json::object(), entries);
    // chop the payload
    {
        std::ifstream in(path, std::ios::binary);
        std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        std::ofstream out(path, std::ios::binary);
        out.write(all.data(), static_cast<std::streamsize>(all.size() - 8));
    }
    CHECK_THROWS_AS(load_checkpoint(path), DataError);
    CHECK_THROWS_AS(load_checkpoint("does_not_exist.bin"), DataError);
    std::remove(path.c_str());
}
