#pragma once

#include <array>
#include <bit>
#include <cstdio>
#include <cstdint>
#include <cstring>
#include <istream>
#include <nlohmann/json.hpp>
#include <ostream>
#include <sstream>
#include <string>

#include "phasecell/errors.hpp"
#include "phasecell/wigner.hpp"

namespace phasecell {

namespace detail {

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_f64(std::ostream& os, double v) {
  auto u = std::bit_cast<std::uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw ValidationError("truncated grid file");
  return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline double get_f64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw ValidationError("truncated grid file");
  std::uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(u);
}

inline nlohmann::ordered_json axis_json(const Axis& a) {
  return {{"min", a.min}, {"step", a.step}, {"count", a.count}};
}

inline Axis axis_from(const nlohmann::json& j) {
  Axis a{j.at("min").get<double>(), j.at("step").get<double>(), j.at("count").get<std::int64_t>()};
  if (a.count < 1 || !(a.step > 0.0)) throw ValidationError("bad axis in grid header");
  return a;
}

}  // namespace detail

inline constexpr char kGridMagic[4] = {'P', 'C', 'W', 'G'};

/// CSV with header "q,p,W", q-major, values printed with %.17g.
/// Complex grids add a "W_imag" column.
inline void write_grid_csv(std::ostream& os, const WignerGrid& w) {
  const bool cx = !w.is_real();
  os << (cx ? "q,p,W,W_imag\n" : "q,p,W\n");
  for (std::int64_t i = 0; i < w.q.count; ++i)
    for (std::int64_t l = 0; l < w.p.count; ++l) {
      os << detail::fmt17(w.q.value(i)) << ',' << detail::fmt17(w.p.value(l)) << ','
         << detail::fmt17(w.W(i, l).real());
      if (cx) os << ',' << detail::fmt17(w.W(i, l).imag());
      os << '\n';
    }
}

/// Binary layout: "PCWG", uint32 LE header length, UTF-8 JSON header, then
/// float64 LE values row-major (q outer, p inner); complex grids store
/// (re, im) pairs.
inline void write_grid_binary(std::ostream& os, const WignerGrid& w) {
  const bool cx = !w.is_real();
  nlohmann::ordered_json h;
  h["format"] = "phasecell-wigner";
  h["version"] = 1;
  h["hbar"] = w.hbar;
  h["q"] = detail::axis_json(w.q);
  h["p"] = detail::axis_json(w.p);
  h["dtype"] = "float64";
  h["byte_order"] = "little";
  h["order"] = "row-major";
  h["complex"] = cx;
  const std::string hs = h.dump();
  os.write(kGridMagic, 4);
  detail::put_u32(os, static_cast<std::uint32_t>(hs.size()));
  os.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (std::int64_t i = 0; i < w.q.count; ++i)
    for (std::int64_t l = 0; l < w.p.count; ++l) {
      detail::put_f64(os, w.W(i, l).real());
      if (cx) detail::put_f64(os, w.W(i, l).imag());
    }
}

inline WignerGrid read_grid_binary(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kGridMagic, 4) != 0)
    throw ValidationError("not a phasecell grid file");
  const auto len = detail::get_u32(is);
  std::string hs(len, '\0');
  if (!is.read(hs.data(), len)) throw ValidationError("truncated grid header");
  const auto h = nlohmann::json::parse(hs);
  if (h.at("format") != "phasecell-wigner" || h.at("version") != 1 || h.at("dtype") != "float64" ||
      h.at("byte_order") != "little" || h.at("order") != "row-major")
    throw ValidationError("unsupported grid header");
  WignerGrid w;
  w.hbar = h.at("hbar").get<double>();
  w.q = detail::axis_from(h.at("q"));
  w.p = detail::axis_from(h.at("p"));
  const bool cx = h.at("complex").get<bool>();
  w.W.resize(w.q.count, w.p.count);
  for (std::int64_t i = 0; i < w.q.count; ++i)
    for (std::int64_t l = 0; l < w.p.count; ++l) {
      const double re = detail::get_f64(is);
      w.W(i, l) = cplx(re, cx ? detail::get_f64(is) : 0.0);
    }
  return w;
}

inline WignerGrid read_grid_csv(std::istream& is) {
  std::string line;
  std::getline(is, line);
  const bool cx = line == "q,p,W,W_imag";
  if (!cx && line != "q,p,W") throw ValidationError("grid CSV header must be q,p,W");
  std::vector<std::array<double, 4>> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::array<double, 4> r{0, 0, 0, 0};
    std::stringstream ss(line);
    std::string f;
    for (int k = 0; k < (cx ? 4 : 3); ++k) {
      if (!std::getline(ss, f, ',')) throw ValidationError("short grid CSV row");
      r[k] = std::stod(f);
    }
    rows.push_back(r);
  }
  if (rows.empty()) throw ValidationError("empty grid CSV");
  std::int64_t np = 1;
  while (np < static_cast<std::int64_t>(rows.size()) && rows[np][0] == rows[0][0]) ++np;
  if (rows.size() % np != 0) throw ValidationError("grid CSV is not rectangular");
  const auto nq = static_cast<std::int64_t>(rows.size()) / np;
  WignerGrid w;
  w.q = {rows[0][0], nq > 1 ? rows[np][0] - rows[0][0] : 1.0, nq};
  w.p = {rows[0][1], np > 1 ? rows[1][1] - rows[0][1] : 1.0, np};
  w.W.resize(nq, np);
  for (std::int64_t i = 0; i < nq; ++i)
    for (std::int64_t l = 0; l < np; ++l) w.W(i, l) = cplx(rows[i * np + l][2], rows[i * np + l][3]);
  return w;
}

}  // namespace phasecell
