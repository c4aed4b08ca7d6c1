#pragma once

// Ground-state cache files.
//
//   QP-CACHE v1; N=3; p=4; geometry=radial; extent=51.96; n=10393; checksum=<16 hex>
//   <profile value, one per line>
//
// The checksum is FNV-1a over every byte after the header line. Stores are
// first-write-wins: writing identical content again is a no-op, writing
// different content for an existing file is an error.

#include "kml/error.hpp"
#include "kml/format.hpp"
#include "kml/ground_state.hpp"

#include <atomic>
#include <cerrno>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include <unistd.h>

namespace kml {

namespace detail {

inline std::string cache_body(const Field& profile)
{
    std::string body;
    body.reserve(profile.size() * 24);
    for (double v : profile.values()) {
        body += to_decimal(v);
        body += '\n';
    }
    return body;
}

inline std::string cache_header(int dim, double p, const GridSpec& spec, std::uint64_t checksum)
{
    return "QP-CACHE v1; N=" + std::to_string(dim) + "; p=" + to_decimal(p) + "; geometry="
        + to_string(spec.geometry) + "; extent=" + to_decimal(spec.extent) + "; n=" + std::to_string(spec.n)
        + "; checksum=" + to_hex(checksum);
}

inline std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw cache_error("cannot open cache file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace detail

/// Full file content for a ground state.
inline std::string cache_serialize(const GroundState& gs)
{
    const std::string body = detail::cache_body(gs.profile);
    return detail::cache_header(gs.dim, gs.exponent, gs.grid().spec(), fnv1a(body)) + "\n" + body;
}

inline void cache_store(const GroundState& gs, const std::filesystem::path& path)
{
    namespace fs = std::filesystem;
    const std::string content = cache_serialize(gs);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());

    static std::atomic<unsigned> counter{0};
    fs::path tmp = path;
    tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw cache_error("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw cache_error("write failed for " + tmp.string());
    }
    // link() refuses to replace an existing file, which gives first-write-wins.
    const int rc = ::link(tmp.c_str(), path.c_str());
    const int err = errno;
    std::error_code ec;
    fs::remove(tmp, ec);
    if (rc == 0) return;
    if (err != EEXIST) throw cache_error("cannot publish " + path.string() + ": " + std::strerror(err));
    if (detail::read_file(path) != content)
        throw cache_error("conflicting cache entry already present at " + path.string());
}

/// Loads and validates a cache file against the requested key.
inline GroundState cache_load(int dim, double p, const GridSpec& spec, const std::filesystem::path& path)
{
    const std::string text = detail::read_file(path);
    const auto eol = text.find('\n');
    if (eol == std::string::npos) throw cache_error("cache file has no header line");
    const std::string header = text.substr(0, eol);
    const std::string_view body(text.data() + eol + 1, text.size() - eol - 1);

    const std::string magic = "QP-CACHE ";
    if (header.rfind(magic, 0) != 0) throw cache_error("not a QP-CACHE file");
    std::map<std::string, std::string> fields;
    std::string version;
    {
        std::istringstream hs(header.substr(magic.size()));
        std::string item;
        bool first = true;
        while (std::getline(hs, item, ';')) {
            while (!item.empty() && item.front() == ' ') item.erase(0, 1);
            if (first) {
                version = item;
                first = false;
                continue;
            }
            const auto eq = item.find('=');
            if (eq == std::string::npos) throw cache_error("malformed header field '" + item + "'");
            fields[item.substr(0, eq)] = item.substr(eq + 1);
        }
    }
    if (version != "v1") throw cache_error("unsupported cache version '" + version + "'");
    for (const char* key : {"N", "p", "geometry", "extent", "n", "checksum"})
        if (!fields.count(key)) throw cache_error(std::string("cache header lacks ") + key);

    GridSpec stored;
    double stored_p = 0.0;
    try {
        stored.dim = std::stoi(fields["N"]);
        stored_p = parse_decimal(fields["p"]);
        stored.geometry = geometry_from_string(fields["geometry"]);
        stored.extent = parse_decimal(fields["extent"]);
        stored.n = static_cast<std::size_t>(std::stoull(fields["n"]));
    } catch (const std::exception& e) {
        throw cache_error(std::string("malformed cache header: ") + e.what());
    }
    if (stored.dim != dim || stored_p != p || !(stored == spec))
        throw cache_error("cache key mismatch: file holds " + header.substr(0, header.find("; checksum")));
    if (to_hex(fnv1a(body)) != fields["checksum"]) throw cache_error("cache checksum mismatch");

    std::vector<double> values;
    values.reserve(spec.n);
    std::size_t pos = 0;
    while (pos < body.size()) {
        auto next = body.find('\n', pos);
        if (next == std::string_view::npos) next = body.size();
        if (next > pos) {
            try {
                values.push_back(parse_decimal(body.substr(pos, next - pos)));
            } catch (const error&) {
                throw cache_error("malformed profile value in cache");
            }
        }
        pos = next + 1;
    }
    if (values.size() != spec.n) throw cache_error("cache holds a different number of profile values");
    Field profile;
    try {
        profile = Field(make_grid(spec), std::move(values));
    } catch (const invalid_argument&) {
        throw cache_error("cache holds non-finite profile values");
    }
    return GroundState::from_profile(dim, p, std::move(profile));
}

/// File name used inside a cache directory for a given key.
inline std::string cache_file_name(int dim, double p, const GridSpec& spec)
{
    return "qp_N" + std::to_string(dim) + "_p" + to_decimal(p) + "_" + to_string(spec.geometry) + "_L"
        + to_decimal(spec.extent) + "_n" + std::to_string(spec.n) + ".qpc";
}

/// Loads from dir when present, otherwise computes and stores. An empty dir
/// disables caching.
inline GroundState ground_state_cached(int dim, double p, std::optional<GridSpec> spec_opt,
                                       const std::filesystem::path& dir)
{
    const GridSpec spec = spec_opt.value_or(default_qp_grid(dim, p));
    if (dir.empty()) return compute_ground_state(dim, p, spec);
    const auto path = dir / cache_file_name(dim, p, spec);
    if (std::filesystem::exists(path)) return cache_load(dim, p, spec, path);
    auto gs = compute_ground_state(dim, p, spec);
    cache_store(gs, path);
    return gs;
}

} // namespace kml
