#include "geolab/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace geolab {

// ---- sha256 (FIPS 180-4, compact implementation) ----

namespace {
constexpr std::uint32_t kSha256K[64] = {
    0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1, 0x923f82a4,
    0xab1c5ed5, 0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3, 0x72be5d74, 0x80deb1fe,
    0x9bdc06a7, 0xc19bf174, 0xe49b69c1, 0xefbe4786, 0x0fc19dc6, 0x240ca1cc, 0x2de92c6f,
    0x4a7484aa, 0x5cb0a9dc, 0x76f988da, 0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7,
    0xc6e00bf3, 0xd5a79147, 0x06ca6351, 0x14292967, 0x27b70a85, 0x2e1b2138, 0x4d2c6dfc,
    0x53380d13, 0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85, 0xa2bfe8a1, 0xa81a664b,
    0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070, 0x19a4c116,
    0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a, 0x5b9cca4f, 0x682e6ff3,
    0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208, 0x90befffa, 0xa4506ceb, 0xbef9a3f7,
    0xc67178f2};

inline std::uint32_t rotr(std::uint32_t x, int n) { return (x >> n) | (x << (32 - n)); }
}  // namespace

std::string sha256_hex(const std::string& data) {
    std::uint32_t h[8] = {0x6a09e667, 0xbb67ae85, 0x3c6ef372, 0xa54ff53a,
                          0x510e527f, 0x9b05688c, 0x1f83d9ab, 0x5be0cd19};
    std::string msg = data;
    const std::uint64_t bitlen = static_cast<std::uint64_t>(data.size()) * 8;
    msg.push_back('\x80');
    while (msg.size() % 64 != 56) msg.push_back('\0');
    for (int i = 7; i >= 0; --i) msg.push_back(static_cast<char>((bitlen >> (8 * i)) & 0xff));

    for (std::size_t off = 0; off < msg.size(); off += 64) {
        std::uint32_t w[64];
        for (int i = 0; i < 16; ++i) {
            w[i] = (static_cast<std::uint32_t>(static_cast<std::uint8_t>(msg[off + 4 * i])) << 24) |
                   (static_cast<std::uint32_t>(static_cast<std::uint8_t>(msg[off + 4 * i + 1])) << 16) |
                   (static_cast<std::uint32_t>(static_cast<std::uint8_t>(msg[off + 4 * i + 2])) << 8) |
                   static_cast<std::uint32_t>(static_cast<std::uint8_t>(msg[off + 4 * i + 3]));
        }
        for (int i = 16; i < 64; ++i) {
            const std::uint32_t s0 = rotr(w[i - 15], 7) ^ rotr(w[i - 15], 18) ^ (w[i - 15] >> 3);
            const std::uint32_t s1 = rotr(w[i - 2], 17) ^ rotr(w[i - 2], 19) ^ (w[i - 2] >> 10);
            w[i] = w[i - 16] + s0 + w[i - 7] + s1;
        }
        std::uint32_t a = h[0], b = h[1], c = h[2], d = h[3], e = h[4], f = h[5], g = h[6],
                      hh = h[7];
        for (int i = 0; i < 64; ++i) {
            const std::uint32_t S1 = rotr(e, 6) ^ rotr(e, 11) ^ rotr(e, 25);
            const std::uint32_t ch = (e & f) ^ (~e & g);
            const std::uint32_t t1 = hh + S1 + ch + kSha256K[i] + w[i];
            const std::uint32_t S0 = rotr(a, 2) ^ rotr(a, 13) ^ rotr(a, 22);
            const std::uint32_t maj = (a & b) ^ (a & c) ^ (b & c);
            const std::uint32_t t2 = S0 + maj;
            hh = g;
            g = f;
            f = e;
            e = d + t1;
            d = c;
            c = b;
            b = a;
            a = t1 + t2;
        }
        h[0] += a;
        h[1] += b;
        h[2] += c;
        h[3] += d;
        h[4] += e;
        h[5] += f;
        h[6] += g;
        h[7] += hh;
    }
    char out[65];
    for (int i = 0; i < 8; ++i) std::snprintf(out + 8 * i, 9, "%08x", h[i]);
    return std::string(out, 64);
}

std::string format_full(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

// ---- table ----

void Table::row(const std::vector<double>& values) {
    std::vector<std::string> cells;
    cells.reserve(values.size());
    for (double v : values) cells.push_back(format_full(v));
    cells_.push_back(std::move(cells));
}

void Table::row_mixed(const std::vector<std::string>& cells) { cells_.push_back(cells); }

std::string Table::render() const {
    std::ostringstream os;
    for (const auto& c : comments_) os << "# " << c << "\n";
    os << "#";
    for (std::size_t i = 0; i < columns_.size(); ++i) os << (i ? "\t" : " ") << columns_[i];
    os << "\n";
    for (const auto& r : cells_) {
        for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "\t" : "") << r[i];
        os << "\n";
    }
    return os.str();
}

// ---- output bundle ----

OutputBundle::OutputBundle(std::string dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
}

void OutputBundle::add(const std::string& name, const std::string& content) {
    files_.emplace_back(name, content);
}

std::string OutputBundle::flush() {
    std::ostringstream manifest;
    manifest << "# file\tsha256\tbytes\n";
    for (const auto& [name, content] : files_) {
        const std::filesystem::path p = std::filesystem::path(dir_) / name;
        std::ofstream f(p, std::ios::binary);
        if (!f) throw GeolabError("OutputBundle: cannot write " + p.string());
        f.write(content.data(), static_cast<std::streamsize>(content.size()));
        manifest << name << "\t" << sha256_hex(content) << "\t" << content.size() << "\n";
    }
    const std::filesystem::path mp = std::filesystem::path(dir_) / "manifest.txt";
    const std::string mtext = manifest.str();
    std::ofstream mf(mp, std::ios::binary);
    mf.write(mtext.data(), static_cast<std::streamsize>(mtext.size()));
    return mp.string();
}

// ---- config ----

namespace {
std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}
}  // namespace

Config Config::parse_string(const std::string& text) {
    Config cfg;
    std::istringstream is(text);
    std::string line, section = "";
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("config line " + std::to_string(lineno) +
                                  ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        cfg.data_[section][key] = val;
    }
    return cfg;
}

Config Config::parse_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_string(ss.str());
}

bool Config::has(const std::string& section, const std::string& key) const {
    auto it = data_.find(section);
    return it != data_.end() && it->second.count(key) > 0;
}

std::string Config::get_str(const std::string& section, const std::string& key,
                            const std::string& fallback) const {
    auto it = data_.find(section);
    if (it == data_.end()) return fallback;
    auto jt = it->second.find(key);
    return jt == it->second.end() ? fallback : jt->second;
}

double Config::get_num(const std::string& section, const std::string& key,
                       double fallback) const {
    if (!has(section, key)) return fallback;
    const std::string s = get_str(section, key, "");
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0')
        throw ConfigError("config [" + section + "] " + key + ": not a number: " + s);
    return v;
}

long Config::get_int(const std::string& section, const std::string& key, long fallback) const {
    const double v = get_num(section, key, static_cast<double>(fallback));
    if (v != std::floor(v))
        throw ConfigError("config [" + section + "] " + key + ": expected an integer");
    return static_cast<long>(v);
}

void Config::validate(const std::map<std::string, std::vector<std::string>>& schema) const {
    for (const auto& [section, kv] : data_) {
        auto it = schema.find(section);
        if (it == schema.end()) throw ConfigError("config: unknown section [" + section + "]");
        for (const auto& [key, value] : kv) {
            (void)value;
            if (std::find(it->second.begin(), it->second.end(), key) == it->second.end())
                throw ConfigError("config: unknown key '" + key + "' in [" + section + "]");
        }
    }
}

void Config::set(const std::string& section, const std::string& key, const std::string& value) {
    data_[section][key] = value;
}

// ---- svg ----

namespace {
std::string fmt6(double x) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", x);
    return buf;
}
}  // namespace

std::string render_svg(const std::string& title, const std::string& xlabel,
                       const std::string& ylabel, const std::vector<PlotSeries>& series,
                       int width, int height) {
    std::size_t total = 0;
    for (const auto& s : series) total += s.pts.size();
    if (total == 0) throw EmptyDatasetError("render_svg: no points to draw");

    double xlo = 1e300, xhi = -1e300, ylo = 1e300, yhi = -1e300;
    for (const auto& s : series)
        for (const auto& [x, y] : s.pts) {
            xlo = std::min(xlo, x);
            xhi = std::max(xhi, x);
            ylo = std::min(ylo, y);
            yhi = std::max(yhi, y);
        }
    if (xhi - xlo < 1e-12) {
        xlo -= 0.5;
        xhi += 0.5;
    }
    if (yhi - ylo < 1e-12) {
        ylo -= 0.5;
        yhi += 0.5;
    }
    const double ml = 64, mr = 18, mt = 34, mb = 46;
    const double pw = width - ml - mr, ph = height - mt - mb;
    auto X = [&](double x) { return ml + (x - xlo) / (xhi - xlo) * pw; };
    auto Y = [&](double y) { return mt + (yhi - y) / (yhi - ylo) * ph; };

    static const char* palette[] = {"#1f6f8b", "#cb4335", "#1e8449", "#9a6900",
                                    "#6c3483", "#2c3e50"};
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
       << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" "
       << "font-family=\"monospace\" font-size=\"13\">" << title << "</text>\n";
    os << "<rect x=\"" << fmt6(ml) << "\" y=\"" << fmt6(mt) << "\" width=\"" << fmt6(pw)
       << "\" height=\"" << fmt6(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double fx = xlo + (xhi - xlo) * i / 4;
        const double fy = ylo + (yhi - ylo) * i / 4;
        os << "<text x=\"" << fmt6(X(fx)) << "\" y=\"" << fmt6(height - mb + 16)
           << "\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"10\">" << fmt6(fx)
           << "</text>\n";
        os << "<text x=\"" << fmt6(ml - 6) << "\" y=\"" << fmt6(Y(fy) + 3)
           << "\" text-anchor=\"end\" font-family=\"monospace\" font-size=\"10\">" << fmt6(fy)
           << "</text>\n";
    }
    os << "<text x=\"" << width / 2 << "\" y=\"" << height - 10
       << "\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"12\">" << xlabel
       << "</text>\n";
    os << "<text x=\"14\" y=\"" << height / 2
       << "\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"12\" "
       << "transform=\"rotate(-90 14 " << height / 2 << ")\">" << ylabel << "</text>\n";

    int ci = 0;
    for (const auto& s : series) {
        const char* color = palette[ci % 6];
        ++ci;
        if (s.lines && s.pts.size() > 1) {
            os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1\" points=\"";
            for (const auto& [x, y] : s.pts) os << fmt6(X(x)) << "," << fmt6(Y(y)) << " ";
            os << "\"/>\n";
        } else {
            for (const auto& [x, y] : s.pts)
                os << "<circle cx=\"" << fmt6(X(x)) << "\" cy=\"" << fmt6(Y(y))
                   << "\" r=\"1.4\" fill=\"" << color << "\"/>\n";
        }
    }
    os << "</svg>\n";
    return os.str();
}

std::string render_histogram_svg(const std::string& title, const std::string& xlabel,
                                 const std::vector<double>& values, int bins) {
    if (values.empty()) throw EmptyDatasetError("render_histogram_svg: empty dataset");
    double lo = *std::min_element(values.begin(), values.end());
    double hi = *std::max_element(values.begin(), values.end());
    if (hi - lo < 1e-12) hi = lo + 1.0;
    std::vector<int> count(bins, 0);
    for (double v : values) {
        int b = static_cast<int>((v - lo) / (hi - lo) * bins);
        b = std::clamp(b, 0, bins - 1);
        ++count[b];
    }
    std::vector<PlotSeries> series;
    PlotSeries bars;
    bars.lines = true;
    for (int b = 0; b < bins; ++b) {
        const double x0 = lo + (hi - lo) * b / bins;
        const double x1 = lo + (hi - lo) * (b + 1) / bins;
        bars.pts.emplace_back(x0, 0.0);
        bars.pts.emplace_back(x0, static_cast<double>(count[b]));
        bars.pts.emplace_back(x1, static_cast<double>(count[b]));
        bars.pts.emplace_back(x1, 0.0);
    }
    series.push_back(std::move(bars));
    return render_svg(title, xlabel, "count", series);
}

}  // namespace geolab
