#include "quam/metrics.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace quam::metrics {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw EmptyInput("percentile of an empty list");
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("percentile p must be in (0,1)");
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  return values[rank - 1];
}

const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::Accepted: return "accepted";
    case Outcome::Rejected: return "rejected";
    case Outcome::Dropped: return "dropped";
  }
  return "?";
}

namespace {

Outcome parse_outcome(const std::string& s) {
  if (s == "accepted") return Outcome::Accepted;
  if (s == "rejected") return Outcome::Rejected;
  if (s == "dropped") return Outcome::Dropped;
  throw IoError("messages.csv: bad outcome '" + s + "'");
}

double ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

}  // namespace

RunSummary summarize(const RunLog& log) {
  RunSummary s;
  const auto& meta = log.meta;

  std::vector<double> latencies;
  std::uint64_t token_checked = 0;
  double message_key_bits = 0.0;
  std::uint64_t keyed_messages = 0;
  std::uint64_t kak_success = 0;
  for (const auto& m : log.messages) {
    if (m.malicious) {
      ++s.malicious_total;
      if (m.outcome == Outcome::Rejected) ++s.malicious_blocked;
      if (m.outcome == Outcome::Dropped) ++s.malicious_dropped;
      if (m.outcome == Outcome::Accepted) ++s.malicious_accepted;
    } else {
      ++s.legit_sent;
      if (m.outcome == Outcome::Accepted) {
        ++s.legit_delivered;
        latencies.push_back(m.latency_ms);
      }
    }
    if (!m.token_status.empty()) {
      ++token_checked;
      if (m.reason == "qca_token") ++s.qca_rejections;
    }
    if (m.key_bits > 0 && m.outcome == Outcome::Accepted && !m.malicious) {
      message_key_bits += m.key_bits;
      ++keyed_messages;
    }
    if (!m.kak.empty()) {
      ++s.kak_attempts;
      if (m.kak == "success") ++kak_success;
    }
  }
  s.zero_malicious = s.malicious_total == 0;
  // network loss is neither a defense success nor a failure
  s.block_rate = ratio(static_cast<double>(s.malicious_blocked),
                       static_cast<double>(s.malicious_blocked + s.malicious_accepted));
  s.delivery_ratio =
      s.legit_sent == 0 ? 1.0 : static_cast<double>(s.legit_delivered) / static_cast<double>(s.legit_sent);
  if (!latencies.empty()) {
    double sum = 0.0;
    for (double v : latencies) sum += v;
    s.latency_mean_ms = sum / static_cast<double>(latencies.size());
    s.latency_median_ms = latencies.size() == 1 ? latencies[0] : percentile(latencies, 0.5);
    s.latency_p95_ms = latencies.size() == 1 ? latencies[0] : percentile(latencies, 0.95);
  }
  s.qca_rejection_rate = ratio(static_cast<double>(s.qca_rejections), static_cast<double>(token_checked));
  s.key_bits_per_msg = ratio(message_key_bits, static_cast<double>(keyed_messages));
  s.kak_success_rate = ratio(static_cast<double>(kak_success), static_cast<double>(s.kak_attempts));

  const int mg = std::max(0, meta.n_nodes - 1);
  std::vector<double> shed(static_cast<std::size_t>(mg), 0.0);
  std::vector<double> demand(static_cast<std::size_t>(mg), 0.0);
  std::uint64_t runs_attack = 0, flags_attack = 0, runs_clean = 0, flags_clean = 0;
  for (const auto& row : log.timeseries) {
    s.eens_kwh += row.shed_kw * meta.physics_dt / 3600.0;
    s.peak_unserved_kw = std::max(s.peak_unserved_kw, row.shed_kw);
    s.max_balance_error_kw = std::max(s.max_balance_error_kw, row.balance_error_kw);
    for (std::size_t i = 0; i < row.nodes.size() && i < shed.size(); ++i) {
      shed[i] += row.nodes[i].shed_kw;
      demand[i] += row.nodes[i].demand_kw;
    }
    if (row.wls_run) {
      if (row.attack_active) {
        ++runs_attack;
        flags_attack += row.wls_flag ? 1 : 0;
      } else {
        ++runs_clean;
        flags_clean += row.wls_flag ? 1 : 0;
      }
    }
  }
  for (int i = 0; i < mg; ++i) s.shed_fraction.push_back(ratio(shed[i], demand[i]));
  s.wls_runs_attack = runs_attack;
  s.wls_detection_rate = ratio(static_cast<double>(flags_attack), static_cast<double>(runs_attack));
  s.wls_false_flag_rate = ratio(static_cast<double>(flags_clean), static_cast<double>(runs_clean));

  if (!log.timeseries.empty()) {
    const auto& last = log.timeseries.back();
    s.e91_utilization = std::clamp(ratio(last.key_consumed_bits, last.key_generated_bits), 0.0, 1.0);
    if (meta.duration_s > 0.0) s.ids_probes_per_s = static_cast<double>(last.probes_total) / meta.duration_s;
  }

  std::set<int> truth(meta.compromised.begin(), meta.compromised.end());
  s.challenges = detection::detection_scores(log.challenges, truth);
  return s;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void finish(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw IoError(path.string() + ": missing header");
  t.header = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != t.header.size()) throw IoError(path.string() + ": ragged row");
    t.rows.push_back(std::move(cells));
  }
  return t;
}

double to_d(const std::string& s) { return std::stod(s); }
long long to_i(const std::string& s) { return std::stoll(s); }

}  // namespace

void write_timeseries_csv(const fs::path& path, const std::vector<TimeSeriesRow>& rows) {
  auto out = open_out(path);
  const std::size_t n_nodes = rows.empty() ? 0 : rows.front().nodes.size();
  const std::size_t n_links = rows.empty() ? 0 : rows.front().links.size();
  out << "t";
  for (std::size_t i = 1; i <= n_nodes; ++i) {
    for (const char* f : {"gen_kw", "demand_kw", "served_kw", "shed_kw", "import_kw", "soc_kwh", "delta_f_hz"})
      out << ',' << f << '_' << i;
  }
  for (std::size_t e = 0; e < n_links; ++e) {
    for (const char* f : {"qber", "key_pool_bits", "fidelity", "ids_alarm"}) out << ',' << f << "_e" << e;
  }
  out << ",served_kw,shed_kw,import_kw,eens_kwh,balance_error_kw,islanded,attack_active,wls_run,wls_flag,"
         "wls_j,wls_dof,probes_total,key_generated_bits,key_consumed_bits\n";
  for (const auto& r : rows) {
    out << format_double(r.t);
    for (const auto& n : r.nodes) {
      for (double v : {n.generation_kw, n.demand_kw, n.served_kw, n.shed_kw, n.import_kw, n.soc_kwh, n.delta_f_hz})
        out << ',' << format_double(v);
    }
    for (const auto& l : r.links) {
      out << ',' << format_double(l.qber) << ',' << format_double(l.key_pool_bits) << ','
          << format_double(l.fidelity) << ',' << (l.alarm ? 1 : 0);
    }
    out << ',' << format_double(r.served_kw) << ',' << format_double(r.shed_kw) << ',' << format_double(r.import_kw)
        << ',' << format_double(r.eens_kwh) << ',' << format_double(r.balance_error_kw) << ','
        << (r.islanded ? 1 : 0) << ',' << (r.attack_active ? 1 : 0) << ',' << (r.wls_run ? 1 : 0) << ','
        << (r.wls_flag ? 1 : 0) << ',' << format_double(r.wls_objective) << ',' << r.wls_dof << ','
        << r.probes_total << ',' << format_double(r.key_generated_bits) << ','
        << format_double(r.key_consumed_bits) << '\n';
  }
  finish(out, path);
}

void write_messages_csv(const fs::path& path, const std::vector<MessageRecord>& rows) {
  auto out = open_out(path);
  out << "id,created_at,class,src,claimed,dst,malicious,attack_kind,well_formed,outcome,reason,token_status,hops,"
         "latency_ms,key_bits,kak\n";
  for (const auto& m : rows) {
    out << m.id << ',' << format_double(m.created_at) << ',' << m.msg_class << ',' << m.src << ',' << m.claimed
        << ',' << m.dst << ',' << (m.malicious ? 1 : 0) << ',' << m.attack_kind << ',' << (m.well_formed ? 1 : 0)
        << ',' << to_string(m.outcome) << ',' << m.reason << ',' << m.token_status << ',' << m.hops << ','
        << format_double(m.latency_ms) << ',' << m.key_bits << ',' << m.kak << '\n';
  }
  finish(out, path);
}

void write_challenges_csv(const fs::path& path, const std::vector<detection::ChallengeRecord>& rows) {
  auto out = open_out(path);
  out << "target,issued_at,expected,reported,score,verdict\n";
  for (const auto& c : rows) {
    out << c.target << ',' << format_double(c.issued_at) << ',' << format_double(c.expected) << ','
        << format_double(c.reported) << ',' << format_double(c.score) << ',' << detection::to_string(c.verdict)
        << '\n';
  }
  finish(out, path);
}

void write_meta_json(const fs::path& path, const RunMeta& meta) {
  ordered_json j;
  j["n_nodes"] = meta.n_nodes;
  j["duration_s"] = meta.duration_s;
  j["physics_dt"] = meta.physics_dt;
  j["seed"] = meta.seed;
  j["compromised"] = meta.compromised;
  auto out = open_out(path);
  out << j.dump(2) << '\n';
  finish(out, path);
}

std::string summary_json(const RunSummary& s) {
  ordered_json j;
  j["eens_kwh"] = s.eens_kwh;
  j["block_rate"] = s.block_rate;
  j["zero_malicious"] = s.zero_malicious;
  j["malicious_total"] = s.malicious_total;
  j["malicious_blocked"] = s.malicious_blocked;
  j["malicious_dropped"] = s.malicious_dropped;
  j["malicious_accepted"] = s.malicious_accepted;
  j["delivery_ratio"] = s.delivery_ratio;
  j["legit_sent"] = s.legit_sent;
  j["legit_delivered"] = s.legit_delivered;
  j["latency_mean_ms"] = s.latency_mean_ms;
  j["latency_median_ms"] = s.latency_median_ms;
  j["latency_p95_ms"] = s.latency_p95_ms;
  j["e91_utilization"] = s.e91_utilization;
  j["kak_success_rate"] = s.kak_success_rate;
  j["kak_attempts"] = s.kak_attempts;
  j["ids_probes_per_s"] = s.ids_probes_per_s;
  j["qca_rejection_rate"] = s.qca_rejection_rate;
  j["qca_rejections"] = s.qca_rejections;
  j["key_bits_per_msg"] = s.key_bits_per_msg;
  j["peak_unserved_kw"] = s.peak_unserved_kw;
  j["max_balance_error_kw"] = s.max_balance_error_kw;
  j["wls_detection_rate"] = s.wls_detection_rate;
  j["wls_false_flag_rate"] = s.wls_false_flag_rate;
  j["wls_runs_attack"] = s.wls_runs_attack;
  j["challenge_precision"] = s.challenges.precision;
  j["challenge_recall"] = s.challenges.recall;
  j["challenge_precision_vacuous"] = s.challenges.precision_vacuous;
  j["challenge_recall_vacuous"] = s.challenges.recall_vacuous;
  for (std::size_t i = 0; i < s.shed_fraction.size(); ++i)
    j["shed_fraction_" + std::to_string(i + 1)] = s.shed_fraction[i];
  return j.dump(2) + "\n";
}

void write_summary_json(const fs::path& path, const RunSummary& s) {
  auto out = open_out(path);
  out << summary_json(s);
  finish(out, path);
}

void write_run(const fs::path& dir, const RunLog& log, const RunSummary& summary) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  write_timeseries_csv(dir / "timeseries.csv", log.timeseries);
  write_messages_csv(dir / "messages.csv", log.messages);
  write_challenges_csv(dir / "challenges.csv", log.challenges);
  write_meta_json(dir / "run_meta.json", log.meta);
  write_summary_json(dir / "summary.json", summary);
}

RunLog load_run(const fs::path& dir) {
  RunLog log;
  {
    std::ifstream in(dir / "run_meta.json");
    if (!in) throw IoError("cannot read " + (dir / "run_meta.json").string());
    const auto j = nlohmann::json::parse(in);
    log.meta.n_nodes = j.at("n_nodes").get<int>();
    log.meta.duration_s = j.at("duration_s").get<double>();
    log.meta.physics_dt = j.at("physics_dt").get<double>();
    log.meta.seed = j.at("seed").get<std::uint64_t>();
    log.meta.compromised = j.at("compromised").get<std::vector<int>>();
  }
  {
    const auto t = read_csv(dir / "timeseries.csv");
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < t.header.size(); ++i) col[t.header[i]] = i;
    const std::size_t n_nodes = static_cast<std::size_t>(std::count_if(
        t.header.begin(), t.header.end(), [](const std::string& h) { return h.rfind("gen_kw_", 0) == 0; }));
    const std::size_t n_links = static_cast<std::size_t>(std::count_if(
        t.header.begin(), t.header.end(), [](const std::string& h) { return h.rfind("qber_e", 0) == 0; }));
    for (const auto& c : t.rows) {
      TimeSeriesRow r;
      r.t = to_d(c[0]);
      std::size_t k = 1;
      for (std::size_t i = 0; i < n_nodes; ++i) {
        NodeSample n;
        n.generation_kw = to_d(c[k++]);
        n.demand_kw = to_d(c[k++]);
        n.served_kw = to_d(c[k++]);
        n.shed_kw = to_d(c[k++]);
        n.import_kw = to_d(c[k++]);
        n.soc_kwh = to_d(c[k++]);
        n.delta_f_hz = to_d(c[k++]);
        r.nodes.push_back(n);
      }
      for (std::size_t e = 0; e < n_links; ++e) {
        LinkSample l;
        l.qber = to_d(c[k++]);
        l.key_pool_bits = to_d(c[k++]);
        l.fidelity = to_d(c[k++]);
        l.alarm = to_i(c[k++]) != 0;
        r.links.push_back(l);
      }
      r.served_kw = to_d(c[col.at("served_kw")]);
      r.shed_kw = to_d(c[col.at("shed_kw")]);
      r.import_kw = to_d(c[col.at("import_kw")]);
      r.eens_kwh = to_d(c[col.at("eens_kwh")]);
      r.balance_error_kw = to_d(c[col.at("balance_error_kw")]);
      r.islanded = to_i(c[col.at("islanded")]) != 0;
      r.attack_active = to_i(c[col.at("attack_active")]) != 0;
      r.wls_run = to_i(c[col.at("wls_run")]) != 0;
      r.wls_flag = to_i(c[col.at("wls_flag")]) != 0;
      r.wls_objective = to_d(c[col.at("wls_j")]);
      r.wls_dof = static_cast<int>(to_i(c[col.at("wls_dof")]));
      r.probes_total = static_cast<std::uint64_t>(to_i(c[col.at("probes_total")]));
      r.key_generated_bits = to_d(c[col.at("key_generated_bits")]);
      r.key_consumed_bits = to_d(c[col.at("key_consumed_bits")]);
      log.timeseries.push_back(std::move(r));
    }
  }
  {
    const auto t = read_csv(dir / "messages.csv");
    for (const auto& c : t.rows) {
      MessageRecord m;
      m.id = static_cast<std::uint64_t>(to_i(c[0]));
      m.created_at = to_d(c[1]);
      m.msg_class = c[2];
      m.src = static_cast<int>(to_i(c[3]));
      m.claimed = static_cast<int>(to_i(c[4]));
      m.dst = static_cast<int>(to_i(c[5]));
      m.malicious = to_i(c[6]) != 0;
      m.attack_kind = c[7];
      m.well_formed = to_i(c[8]) != 0;
      m.outcome = parse_outcome(c[9]);
      m.reason = c[10];
      m.token_status = c[11];
      m.hops = static_cast<int>(to_i(c[12]));
      m.latency_ms = to_d(c[13]);
      m.key_bits = static_cast<int>(to_i(c[14]));
      m.kak = c[15];
      log.messages.push_back(std::move(m));
    }
  }
  {
    const auto t = read_csv(dir / "challenges.csv");
    for (const auto& c : t.rows) {
      detection::ChallengeRecord r;
      r.target = static_cast<int>(to_i(c[0]));
      r.issued_at = to_d(c[1]);
      r.expected = to_d(c[2]);
      r.reported = to_d(c[3]);
      r.score = to_d(c[4]);
      r.verdict = c[5] == "compromised" ? detection::ChallengeVerdict::Compromised : detection::ChallengeVerdict::Clean;
      log.challenges.push_back(r);
    }
  }
  return log;
}

}  // namespace quam::metrics
