// Use after free through a raw owning pointer.
#include "std_testcase.h"

struct Record {
    int id;
    char name[16];
};

#ifndef OMITBAD

void CWE416_fixture__bad()
{
    Record *record = new Record();
    record->id = 7;
    delete record;
    // FLAW: the record is read after it was deleted
    printIntLine(record->id);
}

#endif

#ifndef OMITGOOD

static void goodG2B()
{
    Record *record = new Record();
    record->id = 7;
    printIntLine(record->id);
    /* FIX: release only after the last use */
    delete record;
}

void CWE416_fixture__good()
{
    goodG2B();
    printLine("done");
}

#endif

#ifdef INCLUDEMAIN

int main(int argc, char *argv[])
{
    (void)argc;
    (void)argv;
#ifndef OMITGOOD
    CWE416_fixture__good();
#endif
#ifndef OMITBAD
    CWE416_fixture__bad();
#endif
    return 0;
}

#endif
