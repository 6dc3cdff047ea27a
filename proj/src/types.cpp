#include "finrag/types.hpp"

#include <set>

#include "finrag/errors.hpp"

namespace finrag {

void RankedList::validate() const {
    std::set<std::string> seen;
    for (size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        if (e.rank != static_cast<int>(i) + 1)
            throw DataError("ranked list for query '" + query_id +
                            "': ranks must be contiguous from 1, found " +
                            std::to_string(e.rank) + " at position " +
                            std::to_string(i + 1));
        if (i > 0 && entries[i - 1].score < e.score)
            throw DataError("ranked list for query '" + query_id +
                            "': scores increase at rank " + std::to_string(e.rank));
        if (!seen.insert(e.doc_id).second)
            throw DataError("ranked list for query '" + query_id +
                            "': duplicate doc id '" + e.doc_id + "'");
    }
}

} // namespace finrag
