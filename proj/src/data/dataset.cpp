#include "fcl/data/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "fcl/errors.hpp"
#include "fcl/ndcore/rng.hpp"

namespace fcl::data {

namespace {
constexpr std::size_t kCifarRecord = 3073;  // 1 label byte + 3*1024 pixel bytes
constexpr std::size_t kCifarPlane = 1024;
}  // namespace

Dataset load_cifar10(const std::filesystem::path& path, std::optional<std::size_t> max_records) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cifar10: cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() % kCifarRecord != 0)
        throw FormatError("cifar10: truncated file " + path.string() + ", " +
                          std::to_string(bytes.size()) + " bytes is not a multiple of 3073 " +
                          "(trailing partial record at offset " +
                          std::to_string(bytes.size() - bytes.size() % kCifarRecord) + ")");

    std::size_t n = bytes.size() / kCifarRecord;
    if (max_records) n = std::min(n, *max_records);

    Dataset ds;
    ds.channels = 3;
    ds.height = 32;
    ds.width = 32;
    ds.num_classes = 10;
    ds.samples.reserve(n);
    for (std::size_t r = 0; r < n; ++r) {
        const unsigned char* rec = bytes.data() + r * kCifarRecord;
        if (rec[0] > 9)
            throw FormatError("cifar10: corrupt record " + std::to_string(r) + ", label byte " +
                              std::to_string(int(rec[0])) + " > 9");
        Sample s;
        s.label = int(rec[0]);
        s.id = std::int64_t(r);
        s.pixels.resize(3 * kCifarPlane);
        for (std::size_t i = 0; i < 3 * kCifarPlane; ++i)
            s.pixels[i] = float(rec[1 + i]) / 255.0f;
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

void save_cifar10(const Dataset& ds, const std::filesystem::path& path) {
    if (ds.channels != 3 || ds.height != 32 || ds.width != 32)
        throw FormatError("cifar10: export requires 3x32x32 samples");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cifar10: cannot write " + path.string());
    std::vector<unsigned char> rec(kCifarRecord);
    for (const Sample& s : ds.samples) {
        if (!s.label) throw MissingLabelError("cifar10: export requires labels on every sample");
        rec[0] = (unsigned char)(*s.label);
        for (std::size_t i = 0; i < 3 * kCifarPlane; ++i) {
            const float v = std::clamp(s.pixels[i], 0.0f, 1.0f);
            rec[1 + i] = (unsigned char)(v * 255.0f + 0.5f);
        }
        out.write(reinterpret_cast<const char*>(rec.data()), std::streamsize(rec.size()));
    }
}

Dataset gen_synthetic(int num_classes, int per_class, int side, nd::real noise_sigma,
                      std::uint64_t seed, std::uint64_t noise_stream) {
    Dataset ds;
    ds.channels = 3;
    ds.height = std::size_t(side);
    ds.width = std::size_t(side);
    ds.num_classes = num_classes;
    const std::size_t npix = ds.pixel_count();

    // Templates are a pure function of the seed; the noise stream is split
    // off so train and test sets can share classes with disjoint draws.
    nd::Rng template_rng(seed);
    nd::Rng noise_rng(nd::split_seed(seed, "noise-" + std::to_string(noise_stream)));

    // Class templates share a common base image so classes are correlated and
    // the probe task is not trivially separable at high noise.
    std::vector<float> base(npix);
    for (auto& v : base) v = float(template_rng.uniform());
    std::vector<std::vector<float>> templates(static_cast<std::size_t>(num_classes));
    for (auto& t : templates) {
        t.resize(npix);
        for (std::size_t i = 0; i < npix; ++i) {
            const double mixed = 0.5 * base[i] + 0.5 * template_rng.uniform();
            t[i] = float(std::clamp(mixed, 0.0, 1.0));
        }
    }

    ds.samples.reserve(std::size_t(num_classes) * std::size_t(per_class));
    std::int64_t next_id = 0;
    for (int c = 0; c < num_classes; ++c) {
        for (int k = 0; k < per_class; ++k) {
            Sample s;
            s.label = c;
            s.id = next_id++;
            s.pixels.resize(npix);
            for (std::size_t i = 0; i < npix; ++i) {
                const double v = double(templates[std::size_t(c)][i]) +
                                 double(noise_sigma) * noise_rng.normal();
                s.pixels[i] = float(std::clamp(v, 0.0, 1.0));
            }
            ds.samples.push_back(std::move(s));
        }
    }
    return ds;
}

}  // namespace fcl::data
