package org.example;

public class JndiLookupHelper {
}
