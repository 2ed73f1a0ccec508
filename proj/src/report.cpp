#include "oiq/report.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace oiq {

std::string format_double(double v, int precision) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    return buf;
}

std::string Report::to_records(int precision) const {
    std::ostringstream os;
    for (const auto& r : records_) {
        os << "{\"query\":\"" << r.query << "\",\"value\":";
        if (std::holds_alternative<double>(r.value))
            os << format_double(std::get<double>(r.value), precision);
        else if (std::holds_alternative<bool>(r.value))
            os << (std::get<bool>(r.value) ? "true" : "false");
        else
            os << "\"" << std::get<std::string>(r.value) << "\"";
        os << ",\"tag\":\"" << r.tag << "\"";
        os << ",\"error_bound\":" << format_double(r.error_bound, 6);
        for (const auto& [k, v] : r.extra) os << ",\"" << k << "\":\"" << v << "\"";
        os << "}\n";
    }
    return os.str();
}

std::string Report::to_human(int precision) const {
    std::size_t qw = 8;
    for (const auto& r : records_) qw = std::max(qw, r.query.size());
    std::ostringstream os;
    for (const auto& r : records_) {
        os << r.query;
        for (std::size_t i = r.query.size(); i < qw + 2; i++) os << ' ';
        if (std::holds_alternative<double>(r.value))
            os << format_double(std::get<double>(r.value), precision);
        else if (std::holds_alternative<bool>(r.value))
            os << (std::get<bool>(r.value) ? "yes" : "no");
        else
            os << std::get<std::string>(r.value);
        os << "  [" << r.tag;
        if (r.error_bound > 0) os << " +-" << format_double(r.error_bound, 3);
        os << "]";
        for (const auto& [k, v] : r.extra) os << "  " << k << "=" << v;
        os << "\n";
    }
    return os.str();
}

}  // namespace oiq
