#include "evontree/calibration.hpp"

#include <omp.h>

#include <algorithm>
#include <cctype>
#include <sstream>

#include "evontree/error.hpp"
#include "evontree/format.hpp"

namespace evontree {

namespace {

struct Counts {
  std::size_t pos = 0;
  std::size_t neg = 0;
};

Counts count_labels(std::span<const LabeledScore> samples) {
  Counts c;
  for (const auto& s : samples) (s.label ? c.pos : c.neg)++;
  if (c.pos == 0 || c.neg == 0)
    throw Error(ErrorCode::DegenerateLabels, "calibration needs both positive and negative labels");
  return c;
}

std::vector<double> candidates(std::span<const LabeledScore> samples, const SweepSpec& spec) {
  if (!(spec.lo <= spec.hi)) throw Error(ErrorCode::InvalidParams, "sweep range is empty");
  std::vector<double> taus{spec.lo, spec.hi};
  for (const auto& s : samples)
    if (s.score >= spec.lo && s.score <= spec.hi) taus.push_back(s.score);
  std::sort(taus.begin(), taus.end());
  taus.erase(std::unique(taus.begin(), taus.end()), taus.end());
  return taus;
}

void choose(CalibrationResult& r, TieBreak tie) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < r.curve.size(); ++i) {
    const double j = r.curve[i].j;
    if (j > r.curve[best].j || (j == r.curve[best].j && tie == TieBreak::Largest)) best = i;
  }
  r.tau_star = r.curve[best].tau;
  r.j_star = r.curve[best].j;
  r.weak = !(r.j_star > 0.0);
}

std::size_t count_above(const std::vector<double>& sorted, double tau) {
  return static_cast<std::size_t>(sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), tau));
}

}  // namespace

CalibrationResult fit_threshold(std::span<const LabeledScore> samples, const SweepSpec& spec) {
  const auto counts = count_labels(samples);
  const auto taus = candidates(samples, spec);
  std::vector<double> pos, neg;
  pos.reserve(counts.pos);
  neg.reserve(counts.neg);
  for (const auto& s : samples) (s.label ? pos : neg).push_back(s.score);
  std::sort(pos.begin(), pos.end());
  std::sort(neg.begin(), neg.end());

  CalibrationResult r;
  r.n_pos = counts.pos;
  r.n_neg = counts.neg;
  r.curve.resize(taus.size());
  const auto n = static_cast<std::ptrdiff_t>(taus.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const double tpr = static_cast<double>(count_above(pos, taus[i])) / static_cast<double>(counts.pos);
    const double fpr = static_cast<double>(count_above(neg, taus[i])) / static_cast<double>(counts.neg);
    r.curve[i] = {taus[i], tpr, fpr, tpr - fpr};
  }
  choose(r, spec.tie_break);
  return r;
}

namespace serial {
CalibrationResult fit_threshold(std::span<const LabeledScore> samples, const SweepSpec& spec) {
  const auto counts = count_labels(samples);
  const auto taus = candidates(samples, spec);
  std::vector<LabeledScore> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.score > b.score; });

  CalibrationResult r;
  r.n_pos = counts.pos;
  r.n_neg = counts.neg;
  r.curve.resize(taus.size());
  // Walk taus from high to low, absorbing samples that rise above each one.
  std::size_t next = 0, above_pos = 0, above_neg = 0;
  for (std::size_t k = taus.size(); k-- > 0;) {
    while (next < sorted.size() && sorted[next].score > taus[k]) {
      (sorted[next].label ? above_pos : above_neg)++;
      ++next;
    }
    const double tpr = static_cast<double>(above_pos) / static_cast<double>(counts.pos);
    const double fpr = static_cast<double>(above_neg) / static_cast<double>(counts.neg);
    r.curve[k] = {taus[k], tpr, fpr, tpr - fpr};
  }
  choose(r, spec.tie_break);
  return r;
}
}  // namespace serial

bool parse_decision(std::string_view reply) {
  std::string lower(reply);
  for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  const auto t = lower.find("true");
  const auto f = lower.find("false");
  if (t == std::string::npos && f == std::string::npos)
    throw Error(ErrorCode::Unparseable, "reply contains neither true nor false");
  return f == std::string::npos || (t != std::string::npos && t < f);
}

bool one_shot_label(const Triple& triple, const PromptTemplate& tmpl, Gateway& gateway) {
  GenerateRequest req;
  req.prompt = tmpl.instantiate(triple.subject.text(), triple.object.text());
  req.max_tokens = 8;
  req.temperature = 0.0;
  return parse_decision(gateway.generate(req));
}

CalibrationSamples collect_samples(const std::vector<ScoredTriple>& scored, Gateway& gateway, int threads) {
  if (threads <= 0) threads = gateway.options().max_in_flight;
  struct Job {
    std::size_t triple;
    std::size_t tmpl;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < scored.size(); ++i)
    for (std::size_t k = 0; k < scored[i].breakdowns.size(); ++k) jobs.push_back({i, k});

  enum class Status : unsigned char { Ok, Unparseable, Failed };
  std::vector<Status> status(jobs.size(), Status::Failed);
  std::vector<unsigned char> labels(jobs.size(), 0);
  const auto n = static_cast<std::ptrdiff_t>(jobs.size());
#pragma omp parallel for schedule(dynamic, 8) num_threads(threads)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto& st = scored[jobs[i].triple];
    const auto& tmpl = prompt_set(st.triple.relation)[jobs[i].tmpl];
    try {
      labels[i] = one_shot_label(st.triple, tmpl, gateway) ? 1 : 0;
      status[i] = Status::Ok;
    } catch (const Error& e) {
      status[i] = e.code() == ErrorCode::Unparseable ? Status::Unparseable : Status::Failed;
    }
  }

  CalibrationSamples out;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& st = scored[jobs[i].triple];
    const auto& tmpl = prompt_set(st.triple.relation)[jobs[i].tmpl];
    switch (status[i]) {
      case Status::Ok:
        out.by_template[tmpl.id()].push_back({st.breakdowns[jobs[i].tmpl].confirm_value, labels[i] != 0});
        break;
      case Status::Unparseable: ++out.unparseable; break;
      case Status::Failed: ++out.failed; break;
    }
  }
  return out;
}

Thresholds CalibrationReport::thresholds() const {
  Thresholds t;
  for (const auto& [id, r] : per_template) t[id] = r.tau_star;
  return t;
}

namespace {

nlohmann::ordered_json result_json(const CalibrationResult& r) {
  nlohmann::ordered_json j;
  j["tau_star"] = r.tau_star;
  j["j_star"] = r.j_star;
  j["weak"] = r.weak;
  j["counts"] = {{"pos", r.n_pos}, {"neg", r.n_neg}};
  auto curve = nlohmann::ordered_json::array();
  for (const auto& p : r.curve) curve.push_back({p.tau, p.tpr, p.fpr, p.j});
  j["curve"] = std::move(curve);
  return j;
}

CalibrationResult result_from_json(const std::string& id, const nlohmann::json& j) {
  CalibrationResult r;
  r.template_id = id;
  r.tau_star = j.at("tau_star").get<double>();
  r.j_star = j.at("j_star").get<double>();
  r.weak = j.at("weak").get<bool>();
  r.n_pos = j.at("counts").at("pos").get<std::size_t>();
  r.n_neg = j.at("counts").at("neg").get<std::size_t>();
  for (const auto& p : j.at("curve"))
    r.curve.push_back({p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>(), p.at(3).get<double>()});
  return r;
}

}  // namespace

nlohmann::ordered_json CalibrationReport::to_json() const {
  nlohmann::ordered_json j;
  nlohmann::ordered_json templates = nlohmann::ordered_json::object();
  for (const auto& id : all_template_ids()) {
    auto it = per_template.find(id);
    if (it == per_template.end()) continue;
    auto rj = result_json(it->second);
    rj["fallback"] = fallbacks.count(id) != 0;
    templates[id] = std::move(rj);
  }
  j["templates"] = std::move(templates);
  j["pooled"] = result_json(pooled);
  j["unparseable"] = unparseable;
  j["failed"] = failed;
  return j;
}

CalibrationReport CalibrationReport::from_json(const nlohmann::json& j) {
  try {
    CalibrationReport r;
    for (const auto& [id, v] : j.at("templates").items()) {
      r.per_template[id] = result_from_json(id, v);
      if (v.value("fallback", false)) r.fallbacks.insert(id);
    }
    r.pooled = result_from_json("pooled", j.at("pooled"));
    r.unparseable = j.value("unparseable", std::size_t{0});
    r.failed = j.value("failed", std::size_t{0});
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaMismatch, std::string("calibration.json: ") + e.what());
  }
}

std::string CalibrationReport::roc_csv() const {
  std::ostringstream out;
  out << "template_id,tau,tpr,fpr,j\n";
  auto emit = [&](const std::string& id, const CalibrationResult& r) {
    for (const auto& p : r.curve)
      out << id << ',' << format_double(p.tau) << ',' << format_double(p.tpr) << ',' << format_double(p.fpr) << ','
          << format_double(p.j) << '\n';
  };
  for (const auto& id : all_template_ids()) {
    auto it = per_template.find(id);
    if (it != per_template.end()) emit(id, it->second);
  }
  emit("pooled", pooled);
  return out.str();
}

CalibrationReport calibrate(const CalibrationSamples& samples, const SweepSpec& spec) {
  CalibrationReport report;
  report.unparseable = samples.unparseable;
  report.failed = samples.failed;
  std::vector<LabeledScore> all;
  for (const auto& [id, s] : samples.by_template) all.insert(all.end(), s.begin(), s.end());
  report.pooled = fit_threshold(all, spec);
  report.pooled.template_id = "pooled";
  // Templates without a usable fit of their own inherit the pooled one.
  for (const auto& id : all_template_ids()) {
    auto it = samples.by_template.find(id);
    CalibrationResult r = report.pooled;
    if (it != samples.by_template.end()) {
      try {
        r = fit_threshold(it->second, spec);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::DegenerateLabels) throw;
        report.fallbacks.insert(id);
      }
    } else {
      report.fallbacks.insert(id);
    }
    r.template_id = id;
    report.per_template[id] = std::move(r);
  }
  return report;
}

}  // namespace evontree
