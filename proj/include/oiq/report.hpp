#pragma once

#include <map>
#include <string>
#include <variant>
#include <vector>

namespace oiq {

// One structured result record.  The human table is a derived view, so no
// information exists only in prose output.
struct Record {
    std::string query;
    std::variant<double, std::string, bool> value;
    std::string tag;              // analytic-exact | analytic-truncated | simulated
    double error_bound = 0;
    std::map<std::string, std::string> extra;  // lexicographically ordered
};

class Report {
public:
    void add(Record rec) { records_.push_back(std::move(rec)); }
    Record& back() { return records_.back(); }
    const std::vector<Record>& records() const { return records_; }

    // newline-delimited JSON records, deterministic field order
    std::string to_records(int precision = 17) const;
    std::string to_human(int precision = 10) const;

private:
    std::vector<Record> records_;
};

std::string format_double(double v, int precision);

}  // namespace oiq
