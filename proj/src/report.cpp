#include "trimlab/report.hpp"

#include <array>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <ostream>

namespace trimlab {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string sci17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16e", v);
  return buf;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += "\"";
  return out;
}

namespace {

void partial_footer(std::ostream& os, bool partial, std::uint64_t completed) {
  if (partial) os << "# partial=true completed=" << completed << "\n";
}

std::string eps_label(double eps) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", eps);
  return buf;
}

}  // namespace

void write_norming_csv(std::ostream& os, const std::vector<NormingRow>& rows) {
  os << "n,b,zeta,g,d,ratio_diag\n";
  for (const auto& r : rows) {
    os << r.n << "," << r.b << "," << fmt17(r.zeta) << "," << fmt17(r.g) << "," << fmt17(r.d)
       << "," << fmt17(r.ratio_diag) << "\n";
  }
}

void write_convergence_csv(std::ostream& os, const ConvergenceReport& rep) {
  os << "n,b,d,mean_abs_error,mean_abs_error_se,mean_ratio,mean_ratio_se";
  for (double eps : rep.eps_grid) {
    const std::string l = eps_label(eps);
    os << ",dev_prob_" << l << ",dev_prob_" << l << "_se";
  }
  os << "\n";
  for (const auto& c : rep.checkpoints) {
    os << c.n << "," << c.b << "," << fmt17(c.d) << "," << fmt17(c.mae) << "," << fmt17(c.mae_se)
       << "," << fmt17(c.mean_ratio) << "," << fmt17(c.ratio_se);
    for (std::size_t e = 0; e < rep.eps_grid.size(); ++e)
      os << "," << fmt17(c.dev_prob[e]) << "," << fmt17(c.dev_prob_se[e]);
    os << "\n";
  }
  partial_footer(os, rep.partial, rep.completed);
}

void write_convergence_plot_csv(std::ostream& os, const ConvergenceReport& rep) {
  os << "n,metric,value\n";
  for (const auto& c : rep.checkpoints) {
    os << c.n << ",mean_abs_error," << fmt17(c.mae) << "\n";
    os << c.n << ",mean_ratio," << fmt17(c.mean_ratio) << "\n";
    for (std::size_t e = 0; e < rep.eps_grid.size(); ++e)
      os << c.n << ",dev_prob_" << eps_label(rep.eps_grid[e]) << "," << fmt17(c.dev_prob[e])
         << "\n";
  }
  partial_footer(os, rep.partial, rep.completed);
}

void write_truncation_csv(std::ostream& os, const TruncationReport& rep) {
  os << "n,b,f,truncated_mean,truncated_se,expected_exact,expected_asymptotic,ratio_mean,"
        "ratio_se,se_defined\n";
  for (const auto& r : rep.rows) {
    os << r.n << "," << r.b << "," << fmt17(r.f) << "," << fmt17(r.t_mean) << ","
       << fmt17(r.t_se) << "," << fmt17(r.expected_exact) << "," << fmt17(r.expected_asym) << ","
       << fmt17(r.ratio_mean) << "," << fmt17(r.ratio_se) << ","
       << (r.se_defined ? "true" : "false") << "\n";
  }
  partial_footer(os, rep.partial, rep.completed);
}

void write_psi_csv(std::ostream& os, const std::vector<PsiEstimate>& rows) {
  os << "lag,psi,b_event,c_event,joint,b_count,c_count,total\n";
  for (const auto& r : rows) {
    os << r.lag << "," << fmt17(r.value) << "," << csv_escape(r.b_desc) << ","
       << csv_escape(r.c_desc) << "," << r.joint << "," << r.b_count << "," << r.c_count << ","
       << r.total << "\n";
  }
}

void write_tail_csv(std::ostream& os, const TailReport& rep) {
  os << "hill,ci_lo,ci_hi,k,divergence_flag,replicas,completed\n";
  os << fmt17(rep.hill) << "," << fmt17(rep.ci_lo) << "," << fmt17(rep.ci_hi) << "," << rep.k
     << "," << (rep.divergence_flag ? "true" : "false") << "," << rep.replicas << ","
     << rep.completed << "\n";
  partial_footer(os, rep.partial, rep.completed);
}

void write_running_csv(std::ostream& os, const TailReport& rep) {
  os << "m,running_mean\n";
  for (const auto& r : rep.running) os << r.m << "," << fmt17(r.mean) << "\n";
  partial_footer(os, rep.partial, rep.completed);
}

void write_omega_csv(std::ostream& os, const TailReport& rep) {
  os << "omega,threshold,frequency\n";
  for (const auto& r : rep.omega_rows)
    os << fmt17(r.omega) << "," << fmt17(r.threshold) << "," << fmt17(r.frequency) << "\n";
  partial_footer(os, rep.partial, rep.completed);
}

void write_validation_csv(std::ostream& os, const ValidationReport& rep) {
  os << "condition,status,note\n";
  const auto line = [&os](const char* name, const ConditionCheck& c) {
    os << name << "," << (c.pass ? "pass" : "fail") << "," << csv_escape(c.note) << "\n";
  };
  line("affine", rep.affine);
  line("finite_image", rep.finite_image);
  line("expansion", rep.expansion);
  line("variation", rep.variation);
  os << "mixing,info," << csv_escape(rep.mixing_note) << "\n";
}

// SHA-1 (FIPS 180-1), enough for content addressing of small text files.
namespace {

struct Sha1 {
  std::uint32_t h[5] = {0x67452301u, 0xEFCDAB89u, 0x98BADCFEu, 0x10325476u, 0xC3D2E1F0u};
  std::uint64_t total = 0;
  std::array<unsigned char, 64> block{};
  std::size_t fill = 0;

  static std::uint32_t rol(std::uint32_t x, int s) { return (x << s) | (x >> (32 - s)); }

  void process(const unsigned char* p) {
    std::uint32_t w[80];
    for (int i = 0; i < 16; ++i)
      w[i] = (std::uint32_t(p[4 * i]) << 24) | (std::uint32_t(p[4 * i + 1]) << 16) |
             (std::uint32_t(p[4 * i + 2]) << 8) | std::uint32_t(p[4 * i + 3]);
    for (int i = 16; i < 80; ++i) w[i] = rol(w[i - 3] ^ w[i - 8] ^ w[i - 14] ^ w[i - 16], 1);
    std::uint32_t a = h[0], b = h[1], c = h[2], d = h[3], e = h[4];
    for (int i = 0; i < 80; ++i) {
      std::uint32_t f, k;
      if (i < 20) {
        f = (b & c) | (~b & d);
        k = 0x5A827999u;
      } else if (i < 40) {
        f = b ^ c ^ d;
        k = 0x6ED9EBA1u;
      } else if (i < 60) {
        f = (b & c) | (b & d) | (c & d);
        k = 0x8F1BBCDCu;
      } else {
        f = b ^ c ^ d;
        k = 0xCA62C1D6u;
      }
      const std::uint32_t t = rol(a, 5) + f + e + k + w[i];
      e = d;
      d = c;
      c = rol(b, 30);
      b = a;
      a = t;
    }
    h[0] += a;
    h[1] += b;
    h[2] += c;
    h[3] += d;
    h[4] += e;
  }

  void update(const unsigned char* data, std::size_t len) {
    total += len;
    while (len > 0) {
      const std::size_t take = std::min(len, block.size() - fill);
      std::memcpy(block.data() + fill, data, take);
      fill += take;
      data += take;
      len -= take;
      if (fill == block.size()) {
        process(block.data());
        fill = 0;
      }
    }
  }

  std::string hex() {
    const std::uint64_t bits = total * 8;
    const unsigned char pad = 0x80;
    update(&pad, 1);
    const unsigned char zero = 0;
    while (fill != 56) update(&zero, 1);
    unsigned char lenb[8];
    for (int i = 0; i < 8; ++i) lenb[i] = static_cast<unsigned char>(bits >> (56 - 8 * i));
    update(lenb, 8);
    char out[41];
    for (int i = 0; i < 5; ++i) std::snprintf(out + 8 * i, 9, "%08x", h[i]);
    return std::string(out, 40);
  }
};

}  // namespace

std::string sha1_hex(const std::string& data) {
  Sha1 s;
  s.update(reinterpret_cast<const unsigned char*>(data.data()), data.size());
  return s.hex();
}

std::string git_blob_sha1(const std::string& content) {
  Sha1 s;
  std::string header = "blob " + std::to_string(content.size());
  header.push_back('\0');
  s.update(reinterpret_cast<const unsigned char*>(header.data()), header.size());
  s.update(reinterpret_cast<const unsigned char*>(content.data()), content.size());
  return s.hex();
}

}  // namespace trimlab
