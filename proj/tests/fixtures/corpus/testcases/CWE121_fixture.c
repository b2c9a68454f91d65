/* Stack-based buffer overflow: copy a 20 byte string into a 10 byte buffer. */
#include "std_testcase.h"

#define SRC_STRING "AAAAAAAAAAAAAAAAAAA"

#ifndef OMITBAD

void CWE121_fixture__bad()
{
    char data[10];
    char source[20];
    /* initialize source with a string longer than data */
    memset(source, 'A', 19);
    source[19] = '\0';
    // data holds 10 bytes, source holds 20
    /* FLAW: no bounds check before the copy */
    strcpy(data, source);
    printLine(data);
}

#endif /* OMITBAD */

#ifndef OMITGOOD

/* goodG2B uses a buffer that is large enough */
static void goodG2B()
{
    char data[20];
    char source[20];
    memset(source, 'A', 19);
    source[19] = '\0';
    // FIX: destination has room for the terminator
    strcpy(data, source);
    printLine(data);
}

void CWE121_fixture__good()
{
    goodG2B();
}

#endif /* OMITGOOD */

#ifdef INCLUDEMAIN

int main(int argc, char *argv[])
{
    (void)argc;
    (void)argv;
#ifndef OMITGOOD
    printLine("Calling good()...");
    CWE121_fixture__good();
#endif
#ifndef OMITBAD
    printLine("Calling bad()...");
    CWE121_fixture__bad();
#endif
    return 0;
}

#endif
