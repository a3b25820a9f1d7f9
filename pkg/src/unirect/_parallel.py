from concurrent.futures import ThreadPoolExecutor


def ordered_map(fn, items, jobs=1):
    """``[fn(x) for x in items]``, optionally on a thread pool.

    Results come back in input order, so reductions over them do not depend
    on the degree of parallelism.
    """
    items = list(items)
    if jobs is None or jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=int(jobs)) as ex:
        return list(ex.map(fn, items))
