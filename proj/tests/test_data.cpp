#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "fcl/data/dataset.hpp"
#include "fcl/data/stream.hpp"
#include "fcl/errors.hpp"
#include "fcl/ndcore/rng.hpp"

using namespace fcl;
using namespace fcl::data;

namespace {

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("fclsim_test_" + name);
}

void write_cifar_records(const std::filesystem::path& p,
                         const std::vector<std::vector<unsigned char>>& records) {
    std::ofstream out(p, std::ios::binary);
    for (const auto& r : records)
        out.write(reinterpret_cast<const char*>(r.data()), std::streamsize(r.size()));
}

std::vector<unsigned char> record(unsigned char label, unsigned char fill) {
    std::vector<unsigned char> r(3073, fill);
    r[0] = label;
    return r;
}

Dataset label_only_dataset(int classes, int per_class) {
    Dataset ds;
    ds.channels = 1;
    ds.height = 1;
    ds.width = 1;
    ds.num_classes = classes;
    int id = 0;
    for (int c = 0; c < classes; ++c)
        for (int i = 0; i < per_class; ++i) {
            Sample s;
            s.id = id++;
            s.label = c;
            s.pixels = {0.0f};
            ds.samples.push_back(s);
        }
    return ds;
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("cifar10 loader decodes records in order") {
    auto p = temp_file("two_records.bin");
    write_cifar_records(p, {record(3, 10), record(7, 20)});
    Dataset ds = load_cifar10(p);
    REQUIRE(ds.samples.size() == 2);
    CHECK(ds.samples[0].label == 3);
    CHECK(ds.samples[1].label == 7);
    CHECK(ds.samples[0].id == 0);
    CHECK(ds.samples[1].id == 1);
    CHECK(ds.samples[0].pixels[0] == doctest::Approx(10.0 / 255.0));
    CHECK(ds.channels * ds.height * ds.width == 3072);
    std::filesystem::remove(p);
}

TEST_CASE("cifar10 pixel byte 255 decodes to exactly 1.0") {
    auto p = temp_file("white.bin");
    write_cifar_records(p, {record(0, 255)});
    Dataset ds = load_cifar10(p);
    for (float v : ds.samples[0].pixels) CHECK(v == 1.0f);
    std::filesystem::remove(p);
}

TEST_CASE("cifar10 loader rejects truncated files with an offset") {
    auto p = temp_file("truncated.bin");
    {
        std::ofstream out(p, std::ios::binary);
        std::vector<char> half(1500, 1);
        out.write(half.data(), std::streamsize(half.size()));
    }
    try {
        load_cifar10(p);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("offset") != std::string::npos);
    }
    std::filesystem::remove(p);
}

TEST_CASE("cifar10 loader rejects label bytes above 9") {
    auto p = temp_file("badlabel.bin");
    write_cifar_records(p, {record(12, 0)});
    CHECK_THROWS_AS(load_cifar10(p), FormatError);
    std::filesystem::remove(p);
}

TEST_CASE("cifar10 loader honors max_records") {
    auto p = temp_file("five.bin");
    write_cifar_records(p, {record(0, 1), record(1, 1), record(2, 1), record(3, 1), record(4, 1)});
    CHECK(load_cifar10(p, 3).samples.size() == 3);
    std::filesystem::remove(p);
}

TEST_CASE("synthetic generator counts, determinism, zero noise") {
    Dataset a = gen_synthetic(4, 100, 8, 0.0, 77);
    CHECK(a.samples.size() == 400);
    std::map<int, int> counts;
    for (const Sample& s : a.samples) counts[*s.label]++;
    for (int c = 0; c < 4; ++c) CHECK(counts[c] == 100);

    // noise_sigma = 0: every sample of a class equals its template.
    for (int i = 1; i < 100; ++i) CHECK(a.samples[0].pixels == a.samples[std::size_t(i)].pixels);

    Dataset b = gen_synthetic(4, 100, 8, 0.0, 77);
    for (std::size_t i = 0; i < a.samples.size(); ++i)
        CHECK(a.samples[i].pixels == b.samples[i].pixels);

    Dataset c = gen_synthetic(2, 10, 8, 0.35, 5);
    for (const Sample& s : c.samples)
        for (float v : s.pixels) {
            CHECK(v >= 0.0f);
            CHECK(v <= 1.0f);
        }
}

TEST_CASE("synthetic noise streams share templates, differ in noise") {
    // Same seed, sigma 0: identical datasets regardless of stream.
    Dataset a0 = gen_synthetic(3, 5, 8, 0.0, 42, 0);
    Dataset b0 = gen_synthetic(3, 5, 8, 0.0, 42, 1);
    for (std::size_t i = 0; i < a0.samples.size(); ++i)
        CHECK(a0.samples[i].pixels == b0.samples[i].pixels);

    // With noise the streams draw differently around the same templates.
    Dataset a1 = gen_synthetic(3, 5, 8, 0.2, 42, 0);
    Dataset b1 = gen_synthetic(3, 5, 8, 0.2, 42, 1);
    CHECK(a1.samples[0].pixels != b1.samples[0].pixels);
}

TEST_CASE("synthetic export round-trips through the cifar container") {
    Dataset ds = gen_synthetic(3, 20, 32, 0.2, 9);
    auto p1 = temp_file("roundtrip1.bin");
    auto p2 = temp_file("roundtrip2.bin");
    save_cifar10(ds, p1);
    Dataset back = load_cifar10(p1);
    REQUIRE(back.samples.size() == ds.samples.size());
    for (std::size_t i = 0; i < back.samples.size(); ++i)
        CHECK(back.samples[i].label == ds.samples[i].label);
    save_cifar10(back, p2);
    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(b1 == b2);
    std::filesystem::remove(p1);
    std::filesystem::remove(p2);

    Dataset small = gen_synthetic(2, 2, 8, 0.0, 1);
    CHECK_THROWS_AS(save_cifar10(small, p1), FormatError);
}

TEST_CASE("stc ordering builds single-class blocks (AAABBB case)") {
    Dataset ds = label_only_dataset(2, 3);
    StreamConfig cfg;
    cfg.stc = 3;
    cfg.clients = 1;
    cfg.segment = 1;
    cfg.segments_per_round = 1;
    cfg.seed = 1;
    auto streams = make_stc_stream(ds, cfg);
    REQUIRE(streams.size() == 1);
    std::vector<int> labels;
    for (std::size_t i : streams[0].order) labels.push_back(*ds.samples[i].label);
    const bool aaabbb = labels == std::vector<int>{0, 0, 0, 1, 1, 1};
    const bool bbbaaa = labels == std::vector<int>{1, 1, 1, 0, 0, 0};
    CHECK((aaabbb || bbbaaa));
}

TEST_CASE("stc=1 adjacent-same-label rate approaches 1/num_classes") {
    Dataset ds = label_only_dataset(5, 200);
    double same = 0, pairs = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        StreamConfig cfg;
        cfg.stc = 1;
        cfg.clients = 1;
        cfg.segment = 1;
        cfg.seed = seed;
        auto streams = make_stc_stream(ds, cfg);
        const auto& ord = streams[0].order;
        for (std::size_t i = 1; i < ord.size(); ++i) {
            same += *ds.samples[ord[i]].label == *ds.samples[ord[i - 1]].label ? 1 : 0;
            pairs += 1;
        }
    }
    const double rate = same / pairs;
    CHECK(std::abs(rate - 0.2) <= 0.05);
}

TEST_CASE("stc 2500 on 10 classes x 5000, 5 clients: <= 4 distinct labels each") {
    Dataset ds = label_only_dataset(10, 5000);
    StreamConfig cfg;
    cfg.stc = 2500;
    cfg.clients = 5;
    cfg.segment = 128;
    cfg.seed = 3;
    auto streams = make_stc_stream(ds, cfg);
    for (const auto& st : streams) {
        std::set<int> labels;
        for (std::size_t i : st.order) labels.insert(*ds.samples[i].label);
        CHECK(labels.size() <= 4);
    }
}

TEST_CASE("partition and STC run-length properties hold on random configs") {
    nd::Rng meta(111);
    for (int trial = 0; trial < 15; ++trial) {
        const int classes = 2 + int(meta.index(4));
        const int per_class = 20 + int(meta.index(60));
        Dataset ds = label_only_dataset(classes, per_class);
        StreamConfig cfg;
        cfg.stc = 1 + meta.index(17);
        cfg.clients = 1 + meta.index(5);
        cfg.segment = 4;
        cfg.seed = meta.next_u64();

        auto streams = make_stc_stream(ds, cfg);
        std::set<std::size_t> seen;
        std::size_t total = 0, min_len = SIZE_MAX, max_len = 0;
        for (const auto& st : streams) {
            total += st.order.size();
            min_len = std::min(min_len, st.order.size());
            max_len = std::max(max_len, st.order.size());
            for (std::size_t i : st.order) CHECK(seen.insert(i).second);
        }
        CHECK(total == ds.samples.size());
        CHECK(max_len - min_len <= 1);

        // Maximal equal-label runs in the global ordering are unions of whole
        // blocks: at least min(stc, class remainder).
        StreamConfig whole = cfg;
        whole.clients = 1;
        auto single = make_stc_stream(ds, whole);
        const auto& ord = single[0].order;
        std::size_t run = 1;
        for (std::size_t i = 1; i <= ord.size(); ++i) {
            if (i < ord.size() && *ds.samples[ord[i]].label == *ds.samples[ord[i - 1]].label) {
                ++run;
                continue;
            }
            const std::size_t leftover = std::size_t(per_class) % cfg.stc;
            const std::size_t min_run = std::min(cfg.stc, leftover == 0 ? cfg.stc : leftover);
            CHECK(run >= min_run);
            run = 1;
        }

        // Reproducibility: identical (samples, config) -> identical shards.
        auto streams2 = make_stc_stream(ds, cfg);
        for (std::size_t k = 0; k < streams.size(); ++k)
            CHECK(streams[k].order == streams2[k].order);
    }
}

TEST_CASE("next_segment wraps cyclically") {
    Dataset ds = label_only_dataset(1, 4);
    ClientStream st;
    st.order = {0, 1, 2, 3};

    auto seg1 = next_segment(st, ds, 2);
    CHECK(seg1[0]->id == 0);
    CHECK(seg1[1]->id == 1);
    auto seg2 = next_segment(st, ds, 2);
    CHECK(seg2[0]->id == 2);
    CHECK(seg2[1]->id == 3);
    auto seg3 = next_segment(st, ds, 2);
    CHECK(seg3[0]->id == 0);
    CHECK(seg3[1]->id == 1);

    ClientStream whole;
    whole.order = {0, 1, 2, 3};
    auto full = next_segment(whole, ds, 4);
    CHECK(full.size() == 4);
    CHECK(whole.cursor == 0);

    // After v calls the cursor advanced by v*n mod shard length.
    ClientStream adv;
    adv.order = {0, 1, 2, 3};
    for (int v = 0; v < 5; ++v) next_segment(adv, ds, 3);
    CHECK(adv.cursor == (5 * 3) % 4);

    ClientStream empty;
    CHECK_THROWS_AS(next_segment(empty, ds, 1), EmptyStreamError);
}

TEST_CASE("stream construction requires labels") {
    Dataset ds;
    ds.channels = 1;
    ds.height = 1;
    ds.width = 1;
    ds.num_classes = 1;
    Sample s;
    s.id = 0;
    s.pixels = {0.0f};
    ds.samples.push_back(s);
    StreamConfig cfg;
    cfg.clients = 1;
    CHECK_THROWS_AS(make_stc_stream(ds, cfg), MissingLabelError);
}

TEST_CASE("segments_from_samples conversion") {
    CHECK(segments_from_samples(1000, 128) == 7);
    CHECK(segments_from_samples(100, 128) == 1);
    CHECK(segments_from_samples(256, 128) == 2);
}

}  // TEST_SUITE
