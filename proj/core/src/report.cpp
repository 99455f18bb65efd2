#include "mhscreen/report.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <iterator>
#include <sstream>

#include "io_util.hpp"

namespace mhscreen {

namespace {

// Shortest round-trip representation.
std::string num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// Fixed notation for human-facing text.
std::string fixed(double v, int digits) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, digits);
  return std::string(buf, res.ptr);
}

std::string fixed(const std::optional<double>& v, int digits) {
  return v ? fixed(*v, digits) : "undefined";
}

std::string xml_escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.insert(0, width - s.size(), ' ');
  return s;
}

constexpr std::array kReferenceResults = {
    ReferenceResult{"tweets", "DBUFS2E", 0.97, 0.96, 0.98},
    ReferenceResult{"tweets", "BBU", 0.97, 0.97, 0.98},
    ReferenceResult{"tweets", "MBBU", 0.96, 0.96, 0.98},
    ReferenceResult{"tweets", "DRB", 0.95, 0.95, 0.97},
    ReferenceResult{"tweets", "Baseline", 0.75, 0.75, 0.75},
    ReferenceResult{"tweets", "Catboost", 0.91, 0.89, 0.91},
    ReferenceResult{"bios", "DBUFS2E", 0.95, 0.96, 0.96},
    ReferenceResult{"bios", "BBU", 0.95, 0.94, 0.96},
    ReferenceResult{"bios", "MBBU", 0.96, 0.96, 0.96},
    ReferenceResult{"bios", "DRB", 0.95, 0.95, 0.96},
    ReferenceResult{"bios", "Baseline", 0.67, 0.62, 0.67},
    ReferenceResult{"bios", "MLP", 0.83, 0.82, 0.83},
};

}  // namespace

std::string confusion_csv(const ConfusionMatrix& m) {
  std::ostringstream out;
  out << "actual,predicted_diagnosed,predicted_control\n"
      << "diagnosed," << m.tp << ',' << m.fn << '\n'
      << "control," << m.fp << ',' << m.tn << '\n';
  return out.str();
}

std::string roc_csv(const RocCurve& curve) {
  std::string out = "fpr,tpr,threshold\n";
  for (const auto& p : curve.points) {
    out += num(p.fpr) + ',' + num(p.tpr) + ',' + num(p.threshold) + '\n';
  }
  return out;
}

std::string roc_svg(const RocCurve& curve, std::string_view title) {
  constexpr double kSize = 400.0, kMargin = 50.0;
  auto sx = [&](double fpr) { return fixed(kMargin + fpr * kSize, 2); };
  auto sy = [&](double tpr) { return fixed(kMargin + (1.0 - tpr) * kSize, 2); };
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"500\" height=\"520\" "
         "viewBox=\"0 0 500 520\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"500\" height=\"520\" fill=\"white\"/>\n"
      << "<text x=\"250\" y=\"30\" text-anchor=\"middle\" font-size=\"14\">"
      << xml_escape(title) << "</text>\n"
      << "<rect x=\"50\" y=\"50\" width=\"400\" height=\"400\" fill=\"none\" stroke=\"black\"/>\n"
      << "<line x1=\"50\" y1=\"450\" x2=\"450\" y2=\"50\" stroke=\"#999\" "
         "stroke-dasharray=\"4 4\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = i / 4.0;
    out << "<text x=\"" << sx(v) << "\" y=\"468\" text-anchor=\"middle\">" << fixed(v, 2)
        << "</text>\n"
        << "<text x=\"44\" y=\"" << sy(v) << "\" text-anchor=\"end\" dy=\"4\">" << fixed(v, 2)
        << "</text>\n";
  }
  out << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"";
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    if (i) out << ' ';
    out << sx(curve.points[i].fpr) << ',' << sy(curve.points[i].tpr);
  }
  out << "\"/>\n"
      << "<text x=\"250\" y=\"490\" text-anchor=\"middle\">False positive rate</text>\n"
      << "<text x=\"15\" y=\"250\" text-anchor=\"middle\" transform=\"rotate(-90 15 250)\">"
         "True positive rate</text>\n"
      << "<text x=\"440\" y=\"440\" text-anchor=\"end\">AUC = " << fixed(curve.auc, 4)
      << "</text>\n"
      << "</svg>\n";
  return out.str();
}

std::string confusion_svg(const ConfusionMatrix& m, std::string_view title) {
  const std::array<std::array<std::uint64_t, 2>, 2> cells = {{{m.tp, m.fn}, {m.fp, m.tn}}};
  const std::array<std::string_view, 2> names = {"diagnosed", "control"};
  std::uint64_t peak = 1;
  for (const auto& row : cells) {
    for (auto v : row) peak = std::max(peak, v);
  }
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"400\" height=\"380\" "
         "viewBox=\"0 0 400 380\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"400\" height=\"380\" fill=\"white\"/>\n"
      << "<text x=\"200\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">"
      << xml_escape(title) << "</text>\n"
      << "<text x=\"250\" y=\"60\" text-anchor=\"middle\">Predicted</text>\n"
      << "<text x=\"30\" y=\"220\" text-anchor=\"middle\" transform=\"rotate(-90 30 220)\">"
         "Actual</text>\n";
  for (int c = 0; c < 2; ++c) {
    out << "<text x=\"" << 175 + c * 150 << "\" y=\"85\" text-anchor=\"middle\">" << names[c]
        << "</text>\n";
  }
  for (int r = 0; r < 2; ++r) {
    out << "<text x=\"95\" y=\"" << 170 + r * 130 << "\" text-anchor=\"end\">" << names[r]
        << "</text>\n";
    for (int c = 0; c < 2; ++c) {
      const double shade = static_cast<double>(cells[r][c]) / static_cast<double>(peak);
      const int level = static_cast<int>(std::lround(235.0 - 175.0 * shade));
      out << "<rect x=\"" << 100 + c * 150 << "\" y=\"" << 100 + r * 130
          << "\" width=\"150\" height=\"130\" stroke=\"black\" fill=\"rgb(" << level << ','
          << level << ",255)\"/>\n"
          << "<text x=\"" << 175 + c * 150 << "\" y=\"" << 170 + r * 130
          << "\" text-anchor=\"middle\" font-size=\"18\">" << cells[r][c] << "</text>\n";
    }
  }
  out << "</svg>\n";
  return out.str();
}

std::string format_cv_table(const CvReport& report) {
  std::ostringstream out;
  out << pad("fold", 5) << pad("n_test", 8) << pad("accuracy", 11) << pad("precision", 11)
      << pad("recall", 11) << pad("f1", 11) << pad("auc", 11) << '\n';
  for (const auto& f : report.per_fold) {
    out << pad(std::to_string(f.fold), 5) << pad(std::to_string(f.test_size), 8);
    if (!f.valid) {
      out << "  invalid: " << f.error << '\n';
      continue;
    }
    out << pad(fixed(f.metrics.accuracy, 4), 11) << pad(fixed(f.metrics.precision, 4), 11)
        << pad(fixed(f.metrics.recall, 4), 11) << pad(fixed(f.metrics.f1, 4), 11)
        << pad(fixed(f.auc, 4), 11) << '\n';
  }
  out << "\nvalid folds: " << report.valid_folds() << " of " << report.k << '\n';
  for (const char* key : {"accuracy", "precision", "recall", "f1", "auc"}) {
    auto it = report.aggregate.find(key);
    out << pad(key, 10) << "  ";
    if (it == report.aggregate.end()) {
      out << "undefined\n";
    } else {
      out << fixed(it->second.mean, 4) << " +/- " << fixed(it->second.stddev, 4) << "  (n="
          << it->second.count << ")\n";
    }
  }
  return out.str();
}

std::span<const ReferenceResult> reference_results() { return kReferenceResults; }

std::string format_reference_table() {
  std::ostringstream out;
  out << "Published reference results (original corpus, not reproducible here)\n"
      << pad("dataset", 8) << "  " << std::string("model").append(14, ' ')
      << pad("acc", 6) << pad("f1", 6) << pad("auc", 6) << '\n';
  for (const auto& r : kReferenceResults) {
    std::string model(r.model);
    model.resize(19, ' ');
    out << pad(std::string(r.dataset), 8) << "  " << model << pad(fixed(r.accuracy, 2), 6)
        << pad(fixed(r.f1, 2), 6) << pad(fixed(r.auc, 2), 6) << '\n';
  }
  return out.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view contents) {
  auto out = detail::open_output(path);
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace mhscreen
