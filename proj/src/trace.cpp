#include "cavsim/trace.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace cavsim {

namespace {

void append_num(std::string& out, double v) {
  if (std::isnan(v)) return;  // empty cell
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  out += buf;
}

}  // namespace

std::string Trace::rows_csv() const {
  std::string out = "t,vehicle,index,fake,x,v,u,x_hat,v_hat,tau,b_rear,b_merge,trigger,infeasible\n";
  for (const auto& r : rows) {
    append_num(out, r.t);
    out += ',';
    out += std::to_string(r.vehicle);
    out += ',';
    out += std::to_string(r.index);
    out += ',';
    out += r.is_fake ? '1' : '0';
    out += ',';
    append_num(out, r.x);
    out += ',';
    append_num(out, r.v);
    out += ',';
    append_num(out, r.u);
    out += ',';
    append_num(out, r.x_hat);
    out += ',';
    append_num(out, r.v_hat);
    out += ',';
    append_num(out, r.tau);
    out += ',';
    append_num(out, r.b_rear);
    out += ',';
    append_num(out, r.b_merge);
    out += ',';
    out += r.triggered ? '1' : '0';
    out += ',';
    out += r.infeasible ? '1' : '0';
    out += '\n';
  }
  return out;
}

std::string Trace::events_csv() const {
  std::string out = "t,vehicle,type,detail\n";
  for (const auto& e : events) {
    append_num(out, e.t);
    out += ',';
    out += std::to_string(e.vehicle);
    out += ',';
    out += e.type;
    out += ',';
    out += e.detail;
    out += '\n';
  }
  return out;
}

void Trace::write(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir + "/trace.csv", std::ios::binary);
    f << rows_csv();
  }
  {
    std::ofstream f(dir + "/events.csv", std::ios::binary);
    f << events_csv();
  }
}

}  // namespace cavsim
