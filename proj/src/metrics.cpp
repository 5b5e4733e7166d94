#include "memdep/train/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <stdexcept>

namespace memdep::train {

namespace {

std::string fixed(double v, int decimals) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string padded(const std::string& s, size_t width) {
  if (s.size() >= width) return s;
  return std::string(width - s.size(), ' ') + s;
}

constexpr const char* kKindNames[3] = {"RAW", "WAR", "WAW"};

}  // namespace

double DepCounts::precision() const {
  int denom = detect + fp;
  return denom == 0 ? 0.0 : static_cast<double>(detect) / denom;
}

double DepCounts::recall() const {
  int denom = detect + miss;
  return denom == 0 ? 0.0 : static_cast<double>(detect) / denom;
}

double DepCounts::f1() const {
  double p = precision(), r = recall();
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

EvalReport evaluate_dependencies(const std::vector<tracer::DependencyRecord>& predicted,
                                 const std::vector<tracer::DependencyRecord>& reference,
                                 double threshold) {
  std::map<std::pair<uint64_t, uint64_t>, tracer::DepKind> pred, ref;
  for (const auto& d : predicted) pred.emplace(std::pair{d.a, d.b}, d.kind);
  for (const auto& d : reference) ref.emplace(std::pair{d.a, d.b}, d.kind);

  EvalReport rep;
  rep.threshold = threshold;
  auto bump = [&](tracer::DepKind k, int DepCounts::* field) {
    rep.total.*field += 1;
    rep.by_kind[static_cast<size_t>(k)].*field += 1;
  };
  for (const auto& [pair, kind] : ref) {
    if (pred.count(pair)) bump(kind, &DepCounts::detect);
    else bump(kind, &DepCounts::miss);
  }
  for (const auto& [pair, kind] : pred)
    if (!ref.count(pair)) bump(kind, &DepCounts::fp);
  return rep;
}

std::string format_report(const EvalReport& r) {
  std::string out = "dependency evaluation, threshold " + fixed(r.threshold, 2) + "\n";
  out += "kind    detect    miss      fp  precision  recall      f1\n";
  auto row = [&](const char* name, const DepCounts& c) {
    out += name;  // three characters: RAW, WAR, WAW, all
    out += padded(std::to_string(c.detect), 11);
    out += padded(std::to_string(c.miss), 8);
    out += padded(std::to_string(c.fp), 8);
    out += padded(fixed(c.precision(), 4), 11);
    out += padded(fixed(c.recall(), 4), 8);
    out += padded(fixed(c.f1(), 4), 8);
    out += '\n';
  };
  for (int k = 0; k < 3; ++k) row(kKindNames[k], r.by_kind[static_cast<size_t>(k)]);
  row("all", r.total);
  return out;
}

std::string format_report_machine(const EvalReport& r) {
  std::string out;
  auto row = [&](const char* name, const DepCounts& c) {
    out += "eval threshold=" + fixed(r.threshold, 2) + " kind=" + name;
    out += " detect=" + std::to_string(c.detect);
    out += " miss=" + std::to_string(c.miss);
    out += " fp=" + std::to_string(c.fp);
    out += " precision=" + fixed(c.precision(), 4);
    out += " recall=" + fixed(c.recall(), 4);
    out += " f1=" + fixed(c.f1(), 4);
    out += '\n';
  };
  for (int k = 0; k < 3; ++k) row(kKindNames[k], r.by_kind[static_cast<size_t>(k)]);
  row("all", r.total);
  return out;
}

std::string format_sweep(const std::vector<SweepRow>& rows) {
  std::string out;
  for (const auto& s : rows) {
    out += fixed(s.threshold, 2);
    out += ' ';
    out += std::to_string(s.detect);
    out += ' ';
    out += std::to_string(s.miss);
    out += ' ';
    out += std::to_string(s.fp);
    out += '\n';
  }
  return out;
}

void Confusion::add(int truth, int predicted) {
  if (truth < 0 || truth >= k || predicted < 0 || predicted >= k)
    throw std::out_of_range("confusion class out of range");
  cells[static_cast<size_t>(truth) * static_cast<size_t>(k) + static_cast<size_t>(predicted)] += 1;
}

int Confusion::at(int truth, int predicted) const {
  return cells[static_cast<size_t>(truth) * static_cast<size_t>(k) + static_cast<size_t>(predicted)];
}

int Confusion::total() const {
  int n = 0;
  for (int c : cells) n += c;
  return n;
}

double Confusion::accuracy() const {
  int n = total();
  if (n == 0) return 0.0;
  int hit = 0;
  for (int c = 0; c < k; ++c) hit += at(c, c);
  return static_cast<double>(hit) / n;
}

double Confusion::macro_f1() const {
  double sum = 0.0;
  int classes = 0;
  for (int c = 0; c < k; ++c) {
    int tp = at(c, c), row = 0, col = 0;
    for (int x = 0; x < k; ++x) {
      row += at(c, x);
      col += at(x, c);
    }
    if (row == 0 && col == 0) continue;
    ++classes;
    int denom = row + col;  // 2tp + fp + fn
    if (denom > 0) sum += 2.0 * tp / denom;
  }
  return classes == 0 ? 0.0 : sum / classes;
}

std::string format_confusion(const Confusion& c, const std::vector<std::string>& names) {
  if (static_cast<int>(names.size()) != c.k)
    throw std::invalid_argument("confusion name count mismatch");
  size_t width = 10;  // fits the corner label
  for (const auto& n : names) width = std::max(width, n.size() + 2);
  std::string out = padded("truth\\pred", width);
  for (const auto& n : names) out += padded(n, width);
  out += '\n';
  for (int t = 0; t < c.k; ++t) {
    out += padded(names[static_cast<size_t>(t)], width);
    for (int p = 0; p < c.k; ++p) out += padded(std::to_string(c.at(t, p)), width);
    out += '\n';
  }
  out += "accuracy=" + fixed(c.accuracy(), 4) + " macro_f1=" + fixed(c.macro_f1(), 4) + "\n";
  return out;
}

}  // namespace memdep::train
