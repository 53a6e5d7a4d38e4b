#pragma once

// Graph exports: Graphviz DOT with full edge data, and an exact-coordinate
// SVG schematic for planar inputs. Both are deterministic in the input order.

#include <algorithm>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "troplift/curve.hpp"

namespace troplift {

inline std::string export_dot(const ZTCurve& c) {
  std::ostringstream out;
  out << "graph troplift {\n";
  out << "  node [shape=circle, width=0.12, label=\"\"];\n";
  for (const auto& v : c.vertices) {
    out << "  v" << v.id;
    if (v.boundary)
      out << " [shape=none, label=\"inf\"]";
    else
      out << " [xlabel=\"" << v.id << "\"]";
    out << ";\n";
  }
  for (const auto& e : c.edges) {
    out << "  v" << e.from << " -- v" << e.to << " [label=\"(";
    for (size_t i = 0; i < e.dir.size(); ++i) {
      if (i) out << ",";
      out << e.dir[i];
    }
    out << ") x" << e.mult << " len " << format_xrat(e.len) << "\"";
    if (!e.len.is_finite()) out << ", style=dashed";
    out << "];\n";
  }
  out << "}\n";
  return out.str();
}

// Planar schematic with every coordinate an exact integer: positions are
// scaled by the lcm of their denominators, rays extend two lattice steps.
inline std::string export_svg(const ZTCurve& c) {
  if (c.n != 2) throw InputError("svg export needs a planar graph (lattice rank 2)");
  std::map<int, std::vector<Rat>> pos = positions(c);

  std::vector<std::pair<std::vector<Rat>, std::vector<Rat>>> lines;  // finite segments
  std::vector<char> dashed;
  for (const auto& e : c.edges) {
    bool ainf = c.vertices[c.index(e.from)].boundary;
    bool binf = c.vertices[c.index(e.to)].boundary;
    if (e.len.is_finite() && !ainf && !binf) {
      lines.push_back({pos.at(e.from), pos.at(e.to)});
      dashed.push_back(0);
    } else {
      int fin = ainf ? e.to : e.from;
      long sgn = ainf ? -1 : 1;
      std::vector<Rat> a = pos.at(fin), b = a;
      for (size_t i = 0; i < b.size(); ++i) b[i] += Rat(2 * sgn) * Rat(e.dir[i]);
      lines.push_back({a, b});
      dashed.push_back(1);
    }
  }

  Int den(1);
  for (const auto& ln : lines)
    for (const auto* pt : {&ln.first, &ln.second})
      for (const auto& x : *pt) den = int_lcm(den, rat_den(x));
  long unit = std::max<long>(1, 48 / std::max<long>(1, den.get_si()));
  Rat scale = Rat(den) * unit;

  Rat minx = 0, maxx = 0, miny = 0, maxy = 0;
  bool any = false;
  for (const auto& ln : lines)
    for (const auto* pt : {&ln.first, &ln.second}) {
      const Rat& x = (*pt)[0];
      const Rat& y = (*pt)[1];
      if (!any || x < minx) minx = x;
      if (!any || x > maxx) maxx = x;
      if (!any || y < miny) miny = y;
      if (!any || y > maxy) maxy = y;
      any = true;
    }
  long margin = 24;
  auto px = [&](const Rat& x) { return Rat((x - minx) * scale).get_num() + margin; };
  auto py = [&](const Rat& y) { return Rat((maxy - y) * scale).get_num() + margin; };
  Int w = Rat((maxx - minx) * scale).get_num() + 2 * margin;
  Int h = Rat((maxy - miny) * scale).get_num() + 2 * margin;

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << w << " " << h
      << "\" width=\"" << w << "\" height=\"" << h << "\">\n";
  for (size_t k = 0; k < lines.size(); ++k) {
    const auto& ln = lines[k];
    out << "  <line x1=\"" << px(ln.first[0]) << "\" y1=\"" << py(ln.first[1])
        << "\" x2=\"" << px(ln.second[0]) << "\" y2=\"" << py(ln.second[1])
        << "\" stroke=\"black\" stroke-width=\"" << (c.edges[k].mult > 1 ? 3 : 1)
        << "\"";
    if (dashed[k]) out << " stroke-dasharray=\"4 3\"";
    out << "/>\n";
  }
  for (const auto& v : c.vertices) {
    if (v.boundary) continue;
    auto it = pos.find(v.id);
    if (it == pos.end()) continue;
    out << "  <circle cx=\"" << px(it->second[0]) << "\" cy=\"" << py(it->second[1])
        << "\" r=\"3\" fill=\"black\"/>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace troplift
