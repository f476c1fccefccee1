/**
 * @file monte_carlo.hpp
 * @brief Seeded Monte Carlo truth samples and their on-disk cache.
 */

#ifndef GMSPLIT_MONTE_CARLO_HPP
#define GMSPLIT_MONTE_CARLO_HPP

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gmsplit/errors.hpp"
#include "gmsplit/gaussian.hpp"
#include "gmsplit/metrics.hpp"
#include "gmsplit/model.hpp"
#include "gmsplit/parallel.hpp"

namespace gmsplit {

static_assert(std::endian::native == std::endian::little, "sample cache assumes a little-endian host");

struct McSamples {
    SampleMatrix samples;      ///< successful draws, in draw order
    std::size_t failed = 0;    ///< draws whose propagation threw
};

inline constexpr std::size_t kMcChunk = 1024;

/**
 * @brief N draws from @p input pushed through @p model.
 *
 * Chunk c of kMcChunk draws uses mt19937_64 seeded from (seed, c), so the
 * result does not depend on the thread count.
 */
inline McSamples mc_truth_samples(const NonlinearModel& model, const Gaussian& input, std::size_t n, std::uint64_t seed,
                                  unsigned threads = 0)
{
    detail::require_dims(model.in_dim() == input.dim(), "mc_truth_samples");
    const Index d = input.dim();
    const Index m = model.out_dim();
    const std::size_t chunks = (n + kMcChunk - 1) / kMcChunk;
    std::vector<SampleMatrix> rows(chunks);
    std::vector<std::vector<char>> ok(chunks);
    const MatrixXd& l = input.cov.lower();
    parallel_for(
        chunks,
        [&](std::size_t c) {
            std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                              static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32)};
            std::mt19937_64 rng(seq);
            std::normal_distribution<double> nd(0.0, 1.0);
            const std::size_t count = std::min(kMcChunk, n - c * kMcChunk);
            rows[c].resize(static_cast<Index>(count), m);
            ok[c].assign(count, 1);
            VectorXd xi(d);
            for (std::size_t k = 0; k < count; ++k) {
                for (Index i = 0; i < d; ++i) {
                    xi(i) = nd(rng);
                }
                try {
                    rows[c].row(static_cast<Index>(k)) = model.value(input.mean + l * xi).transpose();
                } catch (const Error&) {
                    ok[c][k] = 0;
                }
            }
        },
        threads);
    McSamples out;
    std::size_t good = 0;
    for (const auto& o : ok) {
        for (char v : o) {
            good += v ? 1 : 0;
        }
    }
    out.samples.resize(static_cast<Index>(good), m);
    out.failed = n - good;
    Index r = 0;
    for (std::size_t c = 0; c < chunks; ++c) {
        for (std::size_t k = 0; k < ok[c].size(); ++k) {
            if (ok[c][k]) {
                out.samples.row(r++) = rows[c].row(static_cast<Index>(k));
            }
        }
    }
    return out;
}

struct SampleCacheHeader {
    std::uint64_t seed = 0;
    std::size_t requested = 0;
    std::size_t rows = 0;
    Index cols = 0;
    std::size_t failed = 0;
    std::string spec_hash;
};

/// Raw little-endian doubles at @p bin_path; key=value text at bin_path + ".hdr".
inline void write_sample_cache(const std::string& bin_path, const McSamples& mc, const SampleCacheHeader& hdr)
{
    {
        std::ofstream os(bin_path, std::ios::binary);
        if (!os) {
            throw ConfigError("cannot write " + bin_path);
        }
        os.write(reinterpret_cast<const char*>(mc.samples.data()),
                 static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(mc.samples.size())));
    }
    std::ofstream hs(bin_path + ".hdr");
    hs << "seed=" << hdr.seed << "\nN=" << hdr.requested << "\nrows=" << mc.samples.rows() << "\ncols=" << mc.samples.cols()
       << "\nfailed=" << mc.failed << "\nspec_hash=" << hdr.spec_hash << "\n";
}

inline SampleCacheHeader read_sample_cache_header(const std::string& bin_path)
{
    std::ifstream hs(bin_path + ".hdr");
    if (!hs) {
        throw ParseError("cannot read " + bin_path + ".hdr");
    }
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(hs, line)) {
        const auto eq = line.find('=');
        if (eq != std::string::npos) {
            kv[line.substr(0, eq)] = line.substr(eq + 1);
        }
    }
    try {
        SampleCacheHeader h;
        h.seed = std::stoull(kv.at("seed"));
        h.requested = std::stoull(kv.at("N"));
        h.rows = std::stoull(kv.at("rows"));
        h.cols = static_cast<Index>(std::stoll(kv.at("cols")));
        h.failed = std::stoull(kv.at("failed"));
        h.spec_hash = kv.at("spec_hash");
        return h;
    } catch (const std::exception& e) {
        throw ParseError("malformed cache header " + bin_path + ".hdr: " + e.what());
    }
}

inline McSamples read_sample_cache(const std::string& bin_path)
{
    const auto h = read_sample_cache_header(bin_path);
    McSamples mc;
    mc.failed = h.failed;
    mc.samples.resize(static_cast<Index>(h.rows), h.cols);
    std::ifstream is(bin_path, std::ios::binary);
    if (!is) {
        throw ParseError("cannot read " + bin_path);
    }
    const auto bytes = static_cast<std::streamsize>(sizeof(double) * h.rows * static_cast<std::size_t>(h.cols));
    is.read(reinterpret_cast<char*>(mc.samples.data()), bytes);
    if (is.gcount() != bytes) {
        throw ParseError("sample cache " + bin_path + " is truncated");
    }
    return mc;
}

} // namespace gmsplit

#endif // GMSPLIT_MONTE_CARLO_HPP
