#include "vqab/types.hpp"

#include "vqab/errors.hpp"

namespace vqab {

std::string_view to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "train";
}

Split split_from_string(std::string_view s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test") return Split::test;
    throw ValidationError("unknown split '" + std::string(s) + "'");
}

std::string_view to_string(TaskStatus s) {
    switch (s) {
        case TaskStatus::open: return "open";
        case TaskStatus::picked: return "picked";
        case TaskStatus::not_possible: return "not_possible";
    }
    return "open";
}

TaskStatus task_status_from_string(std::string_view s) {
    if (s == "open") return TaskStatus::open;
    if (s == "picked") return TaskStatus::picked;
    if (s == "not_possible") return TaskStatus::not_possible;
    throw ValidationError("unknown task status '" + std::string(s) + "'");
}

}  // namespace vqab
