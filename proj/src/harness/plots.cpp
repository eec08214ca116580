#include "convat/harness/plots.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>

namespace convat::harness {
namespace {

constexpr double kWidth = 640, kHeight = 400;
constexpr double kLeft = 60, kRight = 150, kTop = 40, kBottom = 50;

struct Series {
  std::string name;
  std::string color;
  std::vector<double> x, y;
  std::vector<double> lo, hi;  // optional band
};

struct Chart {
  std::string title, xlabel, ylabel;
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool clamp_y = false;
  std::vector<Series> series;
};

std::string f(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string render(const Chart& c) {
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  const double xspan = c.xmax > c.xmin ? c.xmax - c.xmin : 1.0;
  const double yspan = c.ymax > c.ymin ? c.ymax - c.ymin : 1.0;
  auto px = [&](double x) { return kLeft + (x - c.xmin) / xspan * pw; };
  auto py = [&](double y) {
    if (c.clamp_y) y = std::clamp(y, c.ymin, c.ymax);
    return kTop + ph - (y - c.ymin) / yspan * ph;
  };

  std::string s = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + f(kWidth) + "\" height=\"" + f(kHeight) +
       "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + f(kWidth / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" + escape(c.title) +
       "</text>\n";

  for (int i = 0; i <= 5; ++i) {
    const double yv = c.ymin + yspan * i / 5.0;
    const double xv = c.xmin + xspan * i / 5.0;
    s += "<line x1=\"" + f(kLeft) + "\" y1=\"" + f(py(yv)) + "\" x2=\"" + f(kLeft + pw) + "\" y2=\"" + f(py(yv)) +
         "\" stroke=\"#e0e0e0\"/>\n";
    s += "<text x=\"" + f(kLeft - 6) + "\" y=\"" + f(py(yv) + 4) + "\" text-anchor=\"end\">" + tick(yv) + "</text>\n";
    s += "<text x=\"" + f(px(xv)) + "\" y=\"" + f(kTop + ph + 18) + "\" text-anchor=\"middle\">" + tick(xv) +
         "</text>\n";
  }
  s += "<line x1=\"" + f(kLeft) + "\" y1=\"" + f(kTop + ph) + "\" x2=\"" + f(kLeft + pw) + "\" y2=\"" + f(kTop + ph) +
       "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + f(kLeft) + "\" y1=\"" + f(kTop) + "\" x2=\"" + f(kLeft) + "\" y2=\"" + f(kTop + ph) +
       "\" stroke=\"black\"/>\n";
  s += "<text x=\"" + f(kLeft + pw / 2) + "\" y=\"" + f(kHeight - 12) + "\" text-anchor=\"middle\">" +
       escape(c.xlabel) + "</text>\n";
  s += "<text transform=\"translate(16," + f(kTop + ph / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
       escape(c.ylabel) + "</text>\n";

  for (std::size_t k = 0; k < c.series.size(); ++k) {
    const auto& ser = c.series[k];
    if (!ser.lo.empty() && ser.lo.size() == ser.x.size()) {
      std::string pts;
      for (std::size_t i = 0; i < ser.x.size(); ++i) pts += f(px(ser.x[i])) + "," + f(py(ser.hi[i])) + " ";
      for (std::size_t i = ser.x.size(); i-- > 0;) pts += f(px(ser.x[i])) + "," + f(py(ser.lo[i])) + " ";
      s += "<polygon points=\"" + pts + "\" fill=\"" + ser.color + "\" fill-opacity=\"0.15\" stroke=\"none\"/>\n";
    }
    std::string pts;
    for (std::size_t i = 0; i < ser.x.size(); ++i) {
      pts += (i ? " " : "") + f(px(ser.x[i])) + "," + f(py(ser.y[i]));
    }
    s += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + ser.color + "\" stroke-width=\"2\"/>\n";
    for (std::size_t i = 0; i < ser.x.size(); ++i) {
      s += "<circle cx=\"" + f(px(ser.x[i])) + "\" cy=\"" + f(py(ser.y[i])) + "\" r=\"2.5\" fill=\"" + ser.color +
           "\"/>\n";
    }
    const double ly = kTop + 10 + 20.0 * static_cast<double>(k);
    s += "<line x1=\"" + f(kLeft + pw + 15) + "\" y1=\"" + f(ly) + "\" x2=\"" + f(kLeft + pw + 35) + "\" y2=\"" +
         f(ly) + "\" stroke=\"" + ser.color + "\" stroke-width=\"2\"/>\n";
    s += "<text x=\"" + f(kLeft + pw + 40) + "\" y=\"" + f(ly + 4) + "\">" + escape(ser.name) + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

const char* kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd"};

}  // namespace

std::string run_curves_svg(const RunRecord& record, const std::string& title) {
  if (record.epochs.empty()) return {};
  Chart c;
  c.title = title;
  c.xlabel = "epoch";
  c.ylabel = "accuracy";
  c.clamp_y = true;
  c.xmin = 1;
  c.xmax = std::max<double>(2, static_cast<double>(record.epochs.back().epoch));
  Series tr{"train", kColors[0], {}, {}, {}, {}}, dv{"dev", kColors[1], {}, {}, {}, {}},
      te{"test", kColors[2], {}, {}, {}, {}};
  for (const auto& e : record.epochs) {
    const auto x = static_cast<double>(e.epoch);
    tr.x.push_back(x), tr.y.push_back(e.train_acc);
    dv.x.push_back(x), dv.y.push_back(e.dev_acc);
    te.x.push_back(x), te.y.push_back(e.test_acc);
  }
  c.series = {tr, dv, te};
  return render(c);
}

std::string sweep_svg(const SweepResult& result, const std::string& title) {
  if (result.summary.empty()) return {};
  Chart c;
  c.title = title;
  c.xlabel = result.axis;
  c.ylabel = "accuracy";
  c.clamp_y = true;
  c.xmin = result.summary.front().value;
  c.xmax = result.summary.back().value;
  Series te{"test (mean)", kColors[2], {}, {}, {}, {}}, dv{"dev (mean)", kColors[1], {}, {}, {}, {}};
  for (const auto& s : result.summary) {
    te.x.push_back(s.value), te.y.push_back(s.mean_test);
    te.lo.push_back(s.mean_test - s.std_test), te.hi.push_back(s.mean_test + s.std_test);
    dv.x.push_back(s.value), dv.y.push_back(s.mean_dev);
    dv.lo.push_back(s.mean_dev - s.std_dev), dv.hi.push_back(s.mean_dev + s.std_dev);
  }
  c.series = {te, dv};
  return render(c);
}

std::string cost_svg(const CostTable& table, const std::string& title) {
  if (table.rows.empty()) return {};
  Chart c;
  c.title = title;
  c.xlabel = "extra depth L";
  c.ylabel = "ms per step";
  c.xmin = static_cast<double>(table.rows.front().depth);
  c.xmax = c.xmin;
  c.ymax = 0;
  std::vector<Series> by_regime;
  for (Regime r : {Regime::Ce, Regime::Convat, Regime::Vat}) {
    Series s{std::string(regime_name(r)), kColors[by_regime.size()], {}, {}, {}, {}};
    for (const auto& row : table.rows) {
      if (row.regime != r) continue;
      s.x.push_back(static_cast<double>(row.depth));
      s.y.push_back(row.mean_step_ms);
      c.xmax = std::max(c.xmax, static_cast<double>(row.depth));
      c.xmin = std::min(c.xmin, static_cast<double>(row.depth));
      c.ymax = std::max(c.ymax, row.mean_step_ms * 1.1);
    }
    by_regime.push_back(std::move(s));
  }
  c.series = std::move(by_regime);
  return render(c);
}

std::vector<std::string> emit_plots(const std::vector<RunRecord>& records, const std::string& dir,
                                    const std::string& prefix) {
  std::vector<std::string> written;
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto svg = run_curves_svg(records[i], prefix + std::to_string(i));
    if (svg.empty()) {
      std::cerr << "warning: run " << i << " has no epochs; no plot written\n";
      continue;
    }
    const auto path = (std::filesystem::path(dir) / (prefix + std::to_string(i) + ".svg")).string();
    write_file_atomic(path, svg);
    written.push_back(path);
  }
  return written;
}

}  // namespace convat::harness
